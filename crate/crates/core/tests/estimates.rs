use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use formica::diagnostics::{degiorgi_energy, degiorgi_threshold, fit_envelope, gns_ratio};
use formica::grid::{gradient_faces, integrate, lp_norm, FaceVelocity, Field, Grid};
use formica::heat_kernel::{
    bound_lemma41, bound_lemma42, calibrate_constant, gradient_bound_exponent, gradient_time_exponent, BoundParams41, BoundParams42,
};
use formica::models::{run, FieldName, Model, ModelKind, ModelParams, RunConfig};
use formica::ode::{comparison_check, integrate_sup_ode, OdeParams, SupWindow};
use formica::spectral::NeumannSolver;
use formica::stepper::{imex_step_with, StepSpec};

fn bumps(g: Grid, centres: &[(f64, f64, f64)]) -> Field {
    Field::from_fn(g, |x, y| {
        centres
            .iter()
            .map(|&(cx, cy, s)| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    })
    .unwrap()
}

/// `|grad f|` at cell centres from averaged face gradients.
fn grad_magnitude(f: &Field) -> Field {
    let g = *f.grid();
    let fv = gradient_faces(f);
    let vals = (0..g.ny())
        .flat_map(|j| (0..g.nx()).map(move |i| (i, j)))
        .map(|(i, j)| {
            let gx = 0.5 * (fv.xf(i, j) + fv.xf(i + 1, j));
            let gy = 0.5 * (fv.yf(i, j) + fv.yf(i, j + 1));
            gx.hypot(gy)
        })
        .collect();
    Field::new(g, vals).unwrap()
}

const Q: f64 = 4.0;
const THETA: f64 = 1.0;

/// `(t, ||grad phi(t)||_q)` for `phi_t - Lap phi = f`, `phi(0) = 0`.
fn gradient_history(f: &Field, solver: &NeumannSolver) -> Vec<(f64, f64)> {
    let g = *f.grid();
    let dt = 2e-3;
    let vel = FaceVelocity::zeros(g);
    let spec = StepSpec {
        source: Some(f),
        ..StepSpec::diffusion(1.0, dt)
    };
    let mut phi = Field::zeros(g);
    let mut out = Vec::new();
    for k in 1..=150 {
        phi = imex_step_with(solver, &phi, &vel, &spec).unwrap();
        if k % 5 == 0 {
            out.push((k as f64 * dt, lp_norm(&grad_magnitude(&phi), Q).unwrap()));
        }
    }
    out
}

fn bound_shape(t: f64, f: &Field) -> f64 {
    let p = BoundParams41 {
        n: 2,
        q: Q,
        theta: THETA,
        grad_phi0: 0.0,
        f_l1: lp_norm(f, 1.0).unwrap(),
        f_qtheta: lp_norm(f, Q * THETA / 2.0).unwrap(),
        t,
        c_n: 1.0,
    };
    bound_lemma41(&p).unwrap()
}

#[test]
fn gradient_bound_holds_after_calibration() {
    let g = Grid::new(64, 64, 1.0, 1.0).unwrap();
    let solver = NeumannSolver::new(g);
    let reference = bumps(g, &[(0.5, 0.5, 0.1)]);
    let target = lp_norm(&reference, Q * THETA / 2.0).unwrap();
    let ratios: Vec<f64> = gradient_history(&reference, &solver)
        .iter()
        .map(|&(t, m)| m / bound_shape(t, &reference))
        .collect();
    let c = calibrate_constant(&ratios, 2.0).unwrap();
    assert!(gradient_bound_exponent(2, Q, THETA).unwrap() > 0.0 && gradient_time_exponent(2, Q) > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let centres: Vec<(f64, f64, f64)> = (0..2)
            .map(|_| (rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.08..0.15)))
            .collect();
        let raw = bumps(g, &centres);
        let f = raw.scaled(target / lp_norm(&raw, Q * THETA / 2.0).unwrap()).unwrap();
        for (t, m) in gradient_history(&f, &solver) {
            let bound = c * bound_shape(t, &f);
            assert!(m <= bound, "t = {t}: |grad phi|_q = {m} above {bound}");
        }
    }
}

proptest! {
    #[test]
    fn bounds_are_monotone_in_norms(
        base in prop::collection::vec(0.0f64..10.0, 6),
        which in 0usize..6,
        bump in 0.0f64..5.0,
        t in 0.01f64..5.0,
    ) {
        let p41 = |v: &[f64]| BoundParams41 {
            n: 2, q: Q, theta: THETA, grad_phi0: v[0], f_l1: v[1], f_qtheta: v[2], t, c_n: 1.0,
        };
        let p42 = |v: &[f64]| BoundParams42 {
            n: 2, phi0_inf: v[0], f_l1: v[1], phi_l1: v[2], f_inf: v[3], grad_v_inf: v[4], t_end: 1.0 + t,
            c1: 1.0, c2: 1.0,
        };
        let mut up = base.clone();
        up[which] += bump;
        prop_assert!(bound_lemma41(&p41(&up)).unwrap() >= bound_lemma41(&p41(&base)).unwrap());
        prop_assert!(bound_lemma42(&p42(&up)).unwrap() >= bound_lemma42(&p42(&base)).unwrap());
    }

    #[test]
    fn envelope_dominates_every_point(
        pts in prop::collection::vec((0.01f64..5.0, 0.0f64..100.0), 10..60),
    ) {
        prop_assume!(pts.iter().any(|p| p.1 > 0.0));
        let fit = fit_envelope(&pts, 0.01).unwrap();
        for &(t, v) in &pts {
            prop_assert!(fit.envelope.value(t) >= v * (1.0 - 1e-12));
        }
    }

    #[test]
    fn threshold_monotonicity(
        w0 in 0.01f64..10.0, t_star in 0.1f64..1.0, t_end in 1.5f64..5.0,
        a in 0.01f64..0.5, c in 0.1f64..5.0, k in 1.01f64..3.0,
    ) {
        let m = |w0: f64, ts: f64, te: f64, a: f64, c: f64| degiorgi_threshold(w0, ts, te, 2.0, a, c).unwrap();
        let base = m(w0, t_star, t_end, a, c);
        prop_assert!(m(k * w0, t_star, t_end, a, c) >= base);
        prop_assert!(m(w0, t_star, k * t_end, a, c) >= base);
        prop_assert!(m(w0, t_star, t_end, a, k * c) >= base);
        prop_assert!(m(w0, t_star, t_end, (k * a).min(0.99), c) <= base);
        prop_assert!(m(w0, (k * t_star).min(0.99 * t_end), t_end, a, c) <= base);
    }

    #[test]
    fn gns_ratio_is_translation_invariant(
        cx in 0.42f64..0.58, cy in 0.42f64..0.58, shift in -3i32..=3, alpha in 1.0f64..3.0,
    ) {
        let g = Grid::new(40, 40, 1.0, 1.0).unwrap();
        let h = g.dx();
        let a = bumps(g, &[(cx, cy, 0.03)]);
        let b = bumps(g, &[(cx + shift as f64 * h, cy - shift as f64 * h, 0.03)]);
        // both bumps sit well inside, so the shift moves the same values
        let (ra, rb) = (gns_ratio(&a, alpha).unwrap(), gns_ratio(&b, alpha).unwrap());
        prop_assert!((ra - rb).abs() <= 1e-10 * ra.max(1.0), "{} vs {}", ra, rb);
    }
}

#[test]
fn level_set_energies_decrease_in_k() {
    let g = Grid::new(32, 32, 1.0, 1.0).unwrap();
    let mut p = ModelParams::new(ModelKind::Fpd, g);
    p.food = bumps(g, &[(0.3, 0.3, 0.1)]);
    p.potential = Field::from_fn(g, |x, y| -((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt()).unwrap();
    let model = Model::new(p).unwrap();
    let init = model
        .initial_state(bumps(g, &[(0.3, 0.3, 0.05)]).scaled(4.0).unwrap(), bumps(g, &[(0.7, 0.6, 0.1)]), None, None)
        .unwrap();
    let traj = run(&model, init, &RunConfig::new(1.0, 2e-3, 5)).unwrap();
    for m in [0.2, 0.5, 1.0] {
        let e = degiorgi_energy(&traj, FieldName::W, m, 0.5, 10).unwrap();
        let w0 = e.values[0];
        assert!(w0 > 0.0);
        for k in 0..10 {
            assert!(e.values[k + 1] <= e.values[k] + 1e-12 * w0, "M = {m}, k = {k}: {:?}", e.values);
        }
    }
    assert!(integrate(traj.last().field(FieldName::W).unwrap()) > 0.0);
}

fn ode(b: f64, c: f64, dt: f64) -> OdeParams {
    OdeParams {
        a: 1.0,
        b,
        c,
        alpha: 3.0,
        alpha0: 1.0,
        gamma: 0.5,
        x0: 2.0,
        t_end: 2.0,
        dt,
        window: SupWindow::Half,
    }
}

#[test]
fn ode_series_increase_with_b_and_c() {
    let pairs = [
        (ode(0.5, 0.2, 1e-3), ode(1.0, 0.2, 1e-3)),
        (ode(0.5, 0.2, 1e-3), ode(0.5, 0.6, 1e-3)),
        (ode(0.0, 0.0, 1e-3), ode(0.1, 0.0, 1e-3)),
    ];
    for (lo, hi) in pairs {
        let (x, y) = (integrate_sup_ode(&lo).unwrap(), integrate_sup_ode(&hi).unwrap());
        // both series share the start time only when c is positive in both
        if x.t == y.t {
            let cmp = comparison_check(&y.pairs(), &x.pairs()).unwrap();
            assert!(cmp.holds, "violation at {:?}", cmp.first_violation);
        } else {
            let yi = |t: f64| y.pairs().iter().find(|p| (p.0 - t).abs() < 1e-12).map(|p| p.1);
            for (t, v) in x.pairs() {
                if let Some(w) = yi(t) {
                    assert!(w >= v - 1e-9);
                }
            }
        }
    }
}

#[test]
fn rk4_order_without_sup_term() {
    let at = |dt: f64| {
        let p = OdeParams {
            x0: 5.0,
            ..ode(1.0, 0.0, dt)
        };
        let s = integrate_sup_ode(&p).unwrap();
        // sample on the coarsest grid's nodes
        (1..=20).map(|k| s.x[(k as f64 * 0.1 / dt).round() as usize]).collect::<Vec<f64>>()
    };
    let (a, b, c) = (at(0.02), at(0.01), at(0.005));
    let diff = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let ratio = diff(&a, &b) / diff(&b, &c);
    assert!(ratio >= 8.0, "refinement ratio {ratio}");
}
