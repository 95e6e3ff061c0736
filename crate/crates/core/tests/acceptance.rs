//! Acceptance suite. Runs every criterion in sequence, prints one
//! PASS/FAIL line each and exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use formica::diagnostics::{fit_envelope, gns_ratio, norm_series, stability_gap, EPS_PLUS};
use formica::elliptic::{solve_screened_poisson, EllipticSpec};
use formica::grid::{Field, Grid};
use formica::models::{run, FieldName, ModelKind, Outcome, SimState, Trajectory};
use formica::ode::{corollary_a2_envelope, integrate_sup_ode, OdeParams, SupWindow};
use formica::scenario::{load_scenario, Builder, Scenario};
use formica::verify::{degiorgi_checks, oracle_check, peak_max_norm, EstimateTolerances, OracleSpec, Status};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn scenario(name: &str) -> Scenario {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).0
}

fn simulate(sc: &Scenario) -> Trajectory {
    let setup = sc.setup().expect("scenario builds");
    run(&setup.model, setup.initial, &setup.run).expect("run starts")
}

fn foraging(s: &SimState) -> &formica::models::ForagingState {
    match s {
        SimState::Foraging(f) => f,
        SimState::KellerSegel(_) => panic!("expected a foraging state"),
    }
}

fn c1_mass(runs: &[(&str, &Trajectory)]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (_, t) in runs {
        pass &= t.outcome == Outcome::Completed;
        for s in &t.snapshots {
            worst = worst.max((s.mass() - t.m0).abs() / t.m0);
        }
    }
    pass &= worst <= 1e-9;
    verdict(pass, format!("max |m(t) - m0| / m0 = {worst:.3e} <= 1e-9 over FPD and SPD snapshots"))
}

fn c2_positivity(runs: &[(&str, &Trajectory)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t) in runs {
        let f0 = foraging(&t.snapshots[0]);
        let scale = f0.u.max().max(f0.w.max()).max(f0.c.max());
        let min = t
            .snapshots
            .iter()
            .map(|s| {
                let f = foraging(s);
                f.u.min().min(f.w.min()).min(f.c.min())
            })
            .fold(f64::INFINITY, f64::min);
        pass &= min >= -1e-12 * scale;
        parts.push(format!("{name}: min {min:.3e} (bound {:.3e})", -1e-12 * scale));
    }
    verdict(pass, parts.join(", "))
}

fn c3_elliptic() -> Verdict {
    let err = |n: usize| {
        let g = Grid::new(n, n, 1.0, 1.0).unwrap();
        let w = Field::from_fn(g, |x, _| 2.0 * PI * PI * (PI * x).cos()).unwrap();
        let p = solve_screened_poisson(&w, &EllipticSpec::new(0.0)).unwrap();
        let exact = Field::from_fn(g, |x, _| 2.0 * (PI * x).cos()).unwrap();
        p.zip_map(&exact, |a, b| a - b).unwrap().max_abs()
    };
    let e: Vec<f64> = [64, 128, 256].iter().map(|&n| err(n)).collect();
    let orders = [(e[0] / e[1]).log2(), (e[1] / e[2]).log2()];
    let pass = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    verdict(
        pass,
        format!(
            "errors {:.3e}, {:.3e}, {:.3e}; orders {:.3}, {:.3} in 2.0 +- 0.2",
            e[0], e[1], e[2], orders[0], orders[1]
        ),
    )
}

fn c4_oracle() -> Verdict {
    let report = oracle_check(&OracleSpec::default()).expect("oracle runs");
    let c = report.get("oracle.diffusion").expect("diffusion case");
    verdict(c.status == Status::Pass, format!("256^2, dt = 1e-4, t = 0.05: {}", c.detail))
}

fn envelope_beta(t: &Trajectory, gamma: f64) -> (f64, f64) {
    let series = norm_series(t, &[FieldName::U], gamma).unwrap();
    let window: Vec<(f64, f64)> = series.into_iter().filter(|&(s, _)| (0.01..=2.0).contains(&s)).collect();
    let fit = fit_envelope(&window, 0.01).unwrap();
    let worst = window
        .iter()
        .map(|&(s, v)| v - fit.envelope.value(s))
        .fold(f64::NEG_INFINITY, f64::max);
    (fit.envelope.beta, worst)
}

fn c5_lgamma(t: &Trajectory) -> Verdict {
    let peak = foraging(&t.snapshots[0]).u.max();
    let (b2, d2) = envelope_beta(t, 2.0);
    let (b4, d4) = envelope_beta(t, 4.0);
    let pass = peak >= 1e3 && b2 <= 0.5 + EPS_PLUS && b4 <= 0.80 && d2 <= 0.0 && d4 <= 0.0;
    verdict(
        pass,
        format!("peak {peak:.1}; beta(L2) = {b2:.4} <= 0.55, beta(L4) = {b4:.4} <= 0.80, all points dominated"),
    )
}

fn c6_linf(t: &Trajectory) -> Verdict {
    let (b, d) = envelope_beta(t, f64::INFINITY);
    verdict(b <= 1.1 && d <= 0.0, format!("beta(Linf) = {b:.4} <= 1.1"))
}

fn c7_uniform(t: &Trajectory) -> Verdict {
    let f0 = foraging(&t.snapshots[0]);
    let init = f0.u.max() + f0.w.max();
    let series: Vec<f64> = t
        .series
        .column("max_u")
        .unwrap()
        .iter()
        .zip(t.series.column("max_w").unwrap())
        .map(|(a, b)| a + b)
        .collect();
    let peak = series.iter().copied().fold(0.0, f64::max);
    let k = series.len() / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (head, tail) = (mean(&series[..k]), mean(&series[series.len() - k..]));
    let pass = f0.u.max() == 1.0
        && f0.w.max() == 1.0
        && t.outcome == Outcome::Completed
        && t.last().t() == 5.0
        && peak <= 10.0 * init
        && tail <= 1.5 * head;
    verdict(
        pass,
        format!("peak {peak:.4} <= 10 x {init}; last-decile mean {tail:.4} <= 1.5 x first-decile {head:.4}"),
    )
}

fn c8_degiorgi(t: &Trajectory) -> Verdict {
    let checks = degiorgi_checks(t, 1.0, &EstimateTolerances::default()).expect("level-set energies");
    let ratio = checks.iter().find(|c| c.name == "degiorgi.ratio");
    let tight = checks.iter().find(|c| c.name == "degiorgi.tight");
    let detail = format!(
        "{}; {}",
        ratio.map_or("no threshold check".into(), |c| c.detail.clone()),
        tight.map_or(String::new(), |c| c.detail.clone())
    );
    verdict(ratio.is_some_and(|c| c.status == Status::Pass), detail)
}

fn c9_stability() -> Verdict {
    let mut rates = Vec::new();
    for n in [64usize, 128] {
        let mut a = scenario("bounded.cfg");
        a.grid.nx = n;
        a.grid.ny = n;
        a.t_end = 1.0;
        let mut b = a.clone();
        b.u0 = Some(Builder::Sum(vec![
            a.u0.clone().unwrap(),
            Builder::Gaussian {
                cx: 0.5,
                cy: 0.5,
                sigma: 0.1,
                amplitude: 1e-6,
            },
        ]));
        let gap = stability_gap(&simulate(&a), &simulate(&b)).unwrap();
        let dominated = gap
            .series
            .iter()
            .all(|&(t, g)| g <= gap.g0 * (gap.rate * t).exp() * (1.0 + 1e-12));
        rates.push((gap.rate, dominated));
    }
    let (c64, c128) = (rates[0].0, rates[1].0);
    let rel = (c128 - c64).abs() / c64.abs();
    let pass = rates.iter().all(|r| r.1 && r.0.is_finite()) && rel <= 0.2;
    verdict(pass, format!("C(64) = {c64:.5}, C(128) = {c128:.5}, relative change {rel:.2e} <= 0.2"))
}

fn c10_ks() -> Verdict {
    let sup = scenario("supercritical.cfg");
    let ks = simulate(&sup);
    let flagged = matches!(ks.outcome, Outcome::BlowUp { t, .. } if t < 0.1);
    let fpd = simulate(&sup.fpd_counterpart().unwrap());
    let f0 = foraging(&fpd.snapshots[0]);
    let init = f0.u.max() + f0.w.max();
    let fpd_ok = fpd.outcome == Outcome::Completed
        && fpd.last().t() == 1.0
        && peak_max_norm(&fpd) <= 10.0 * init
        && (fpd.m0 - ks.m0).abs() <= 1e-12 * ks.m0;
    let sub = simulate(&scenario("subcritical.cfg"));
    let maxes = sub.series.column("max_rho").unwrap();
    let decreasing = maxes.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let sub_ok = sub.outcome == Outcome::Completed && decreasing && maxes.last() < maxes.first();
    let ks_t = match ks.outcome {
        Outcome::BlowUp { t, .. } => format!("{t:.4e}"),
        _ => "never".into(),
    };
    verdict(
        flagged && fpd_ok && sub_ok && ks.kind == ModelKind::Ks,
        format!(
            "mass 1.5 x 8 pi: KS flag at t = {ks_t} (< 0.1); FPD peak {:.4e} <= 10 x {init:.4e} to t = 1; \
             mass 0.1 x 8 pi: max rho {:.4e} -> {:.4e}, non-increasing = {decreasing}",
            peak_max_norm(&fpd),
            maxes.first().unwrap(),
            maxes.last().unwrap()
        ),
    )
}

fn c11_ode() -> Verdict {
    let riccati = OdeParams {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        alpha: 2.0,
        alpha0: 1.0,
        gamma: 0.0,
        x0: 1.0,
        t_end: 2.0,
        dt: 1e-4,
        window: SupWindow::Half,
    };
    let s = integrate_sup_ode(&riccati).unwrap();
    let err = s
        .t
        .iter()
        .zip(&s.x)
        .map(|(t, x)| (x - 1.0 / (1.0 + t)).abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut dominated = 0;
    for _ in 0..50 {
        let p = OdeParams {
            a: rng.gen_range(0.5..2.0),
            b: rng.gen_range(0.0..2.0),
            c: rng.gen_range(0.0..1.0),
            alpha: rng.gen_range(2.0..3.0),
            alpha0: rng.gen_range(0.0..1.0),
            gamma: rng.gen_range(0.0..0.5),
            x0: rng.gen_range(0.0..5.0),
            t_end: 2.0,
            dt: 1e-4,
            window: SupWindow::Half,
        };
        let env = corollary_a2_envelope(&p).unwrap();
        let series = integrate_sup_ode(&p).unwrap();
        if series.t.iter().zip(&series.x).all(|(&t, &x)| t == 0.0 || x <= env.value(t)) {
            dominated += 1;
        }
    }
    verdict(
        err <= 1e-6 && dominated == 50,
        format!("Riccati max error {err:.3e} <= 1e-6; envelope dominates {dominated}/50 draws"),
    )
}

fn random_field(rng: &mut ChaCha8Rng, grid: Grid) -> Field {
    let base = rng.gen_range(0.0..0.1);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            (
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.03..0.3),
                rng.gen_range(0.1..10.0),
            )
        })
        .collect();
    Field::from_fn(grid, |x, y| {
        base + bumps
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum::<f64>()
    })
    .unwrap()
}

fn c12_gns() -> Verdict {
    let grid = Grid::new(32, 32, 1.0, 1.0).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for alpha in [1.0, 2.0, 3.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(7 + alpha as u64);
        let mut running: f64 = 0.0;
        let mut jumps = 0;
        for k in 0..1000 {
            let r = gns_ratio(&random_field(&mut rng, grid), alpha).unwrap();
            if k >= 100 && r > 3.0 * running {
                jumps += 1;
            }
            running = running.max(r);
        }
        pass &= jumps == 0;
        parts.push(format!("alpha {alpha}: sup {running:.4}, late jumps {jumps}"));
    }
    verdict(pass, parts.join("; "))
}

fn main() {
    let started = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t0 = Instant::now();
        let o = f();
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        if !o.pass {
            failures += 1;
        }
    };

    let fpd = simulate(&scenario("fpd_default.cfg"));
    let spd = simulate(&scenario("spd_default.cfg"));
    let defaults = [("fpd", &fpd), ("spd", &spd)];
    report(1, "mass conservation", &mut || c1_mass(&defaults));
    report(2, "positivity", &mut || c2_positivity(&defaults));
    report(3, "elliptic convergence", &mut c3_elliptic);
    report(4, "stepper vs heat kernel", &mut c4_oracle);
    let decay = simulate(&scenario("decay.cfg"));
    report(5, "L2 and L4 decay envelopes", &mut || c5_lgamma(&decay));
    report(6, "Linf decay envelope", &mut || c6_linf(&decay));
    let bounded = simulate(&scenario("bounded.cfg"));
    report(7, "uniform propagation", &mut || c7_uniform(&bounded));
    report(8, "level-set energy decay", &mut || c8_degiorgi(&bounded));
    report(9, "stability under resolution doubling", &mut c9_stability);
    report(10, "Keller-Segel contrast", &mut c10_ks);
    report(11, "ODE comparison suite", &mut c11_ode);
    report(12, "GNS constant stabilizes", &mut c12_gns);

    println!("acceptance: {} of 12 failed in {:.1}s", failures, started.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
