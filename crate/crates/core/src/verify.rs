//! Verification suites shared by the command-line tool and the tests: the
//! heat-kernel cross-check of the stepper, and the estimate report for a
//! stored trajectory.

use std::fmt;

use crate::diagnostics::{
    degiorgi_energy, degiorgi_threshold, fit_envelope, gns_ratio, norm_series, stability_gap, DiagnosticsError,
    EPS_PLUS,
};
use crate::grid::{FaceVelocity, Field, Grid, GridError};
use crate::heat_kernel::{duhamel_solve, DuhamelOptions, KernelError};
use crate::models::{FieldName, ModelKind, SimState, Trajectory};
use crate::spectral::NeumannSolver;
use crate::stepper::{imex_step_with, StepError, StepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn bound(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: if value <= limit { Status::Pass } else { Status::Fail },
            detail: format!("{:.4e} <= {:.4e}{}", value, limit, detail.into()),
        }
    }

    fn info(name: &str, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: Status::Info,
            detail: detail.into(),
        }
    }

    fn failed(name: &str, detail: impl fmt::Display) -> Self {
        Check {
            name: name.into(),
            status: Status::Fail,
            detail: detail.to_string(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Setup of the stepper-versus-kernel comparison: a unit-mass Gaussian of
/// variance `sigma2` in the middle of a `[0, l]^2` box, diffused to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    pub n: usize,
    pub l: f64,
    pub sigma2: f64,
    pub dt: f64,
    pub t_end: f64,
    pub tolerance: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            n: 256,
            l: 4.0,
            sigma2: 0.01,
            dt: 1e-4,
            t_end: 0.05,
            tolerance: 5e-3,
        }
    }
}

fn gaussian(grid: Grid, centre: f64, sigma2: f64) -> Result<Field, GridError> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma2);
    Field::from_fn(grid, |x, y| {
        norm * (-((x - centre).powi(2) + (y - centre).powi(2)) / (2.0 * sigma2)).exp()
    })
}

fn max_diff(a: &Field, b: &Field) -> Result<f64, GridError> {
    Ok(a.zip_map(b, |x, y| x - y)?.max_abs())
}

/// Runs the diffusion case and a case with a steady Gaussian source; each
/// compares repeated implicit steps against the Duhamel formula.
pub fn oracle_check(spec: &OracleSpec) -> Result<Report, OracleError> {
    let grid = Grid::new(spec.n, spec.n, spec.l, spec.l)?;
    let solver = NeumannSolver::new(grid);
    let centre = 0.5 * spec.l;
    let u0 = gaussian(grid, centre, spec.sigma2)?;
    let source = gaussian(grid, centre, 4.0 * spec.sigma2)?;
    let vel = FaceVelocity::zeros(grid);
    let steps = (spec.t_end / spec.dt).round() as usize;
    let t = steps as f64 * spec.dt;

    let mut report = Report::default();
    for (name, src) in [("oracle.diffusion", None), ("oracle.source", Some(&source))] {
        let mut u = u0.clone();
        let mut step = StepSpec::diffusion(1.0, spec.dt);
        step.source = src;
        for _ in 0..steps {
            u = imex_step_with(&solver, &u, &vel, &step)?;
        }
        let s_fn = |_: f64| source.clone();
        let reference = match src {
            None => duhamel_solve(&u0, None, t, &DuhamelOptions::default())?,
            Some(_) => duhamel_solve(&u0, Some(&s_fn), t, &DuhamelOptions::default())?,
        };
        if let Some(w) = &reference.boundary_warning {
            report.checks.push(Check::info(&format!("{name}.boundary"), w.clone()));
        }
        let d = max_diff(&u, &reference.field)?;
        report.checks.push(Check::bound(
            name,
            d,
            spec.tolerance,
            format!(" (max |stepper - kernel| at t = {t}, {0}x{0}, dt = {1:e})", spec.n, spec.dt),
        ));
    }
    Ok(report)
}

/// Thresholds used by [`verify_estimates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateTolerances {
    pub mass_rel: f64,
    pub positivity_rel: f64,
    pub t_min: f64,
    pub beta_l2: f64,
    pub beta_l4: f64,
    pub beta_linf: f64,
    pub growth_factor: f64,
    pub trend_factor: f64,
    pub level_ratio: f64,
    /// `(q, a, C)` passed to the threshold formula.
    pub degiorgi: (f64, f64, f64),
}

impl Default for EstimateTolerances {
    fn default() -> Self {
        Self {
            mass_rel: 1e-9,
            positivity_rel: 1e-12,
            t_min: 0.01,
            beta_l2: 0.5 + EPS_PLUS,
            beta_l4: 0.75 + EPS_PLUS,
            beta_linf: 1.0 + 2.0 * EPS_PLUS,
            growth_factor: 10.0,
            trend_factor: 1.5,
            level_ratio: 0.5,
            degiorgi: (2.0, 1.0 / 64.0, 1.0),
        }
    }
}

fn column(traj: &Trajectory, name: &str) -> Vec<f64> {
    traj.series.column(name).unwrap_or_default()
}

/// Largest relative mass drift over the per-step series.
pub fn mass_drift(traj: &Trajectory) -> f64 {
    let key = if traj.kind == ModelKind::Ks { "mass_rho" } else { "mass_total" };
    let scale = traj.m0.abs().max(f64::MIN_POSITIVE);
    column(traj, key)
        .iter()
        .map(|m| (m - traj.m0).abs() / scale)
        .fold(0.0, f64::max)
}

fn decile_means(v: &[f64]) -> (f64, f64) {
    let k = (v.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&v[..k]), mean(&v[v.len() - k..]))
}

/// Level-set energies of `w` with the threshold level, plus a second series
/// at the observed supremum of `w` over `[t_star / 2, T]`.
pub fn degiorgi_checks(traj: &Trajectory, t_star: f64, tol: &EstimateTolerances) -> Result<Vec<Check>, DiagnosticsError> {
    let (q, a, c) = tol.degiorgi;
    let t_end = traj.last().t();
    let base = degiorgi_energy(traj, FieldName::W, 1.0, t_star, 0)?;
    let w0 = base.values[0];
    let m = degiorgi_threshold(w0, t_star, t_end, q, a, c)?;
    let mut out = Vec::new();
    if w0 == 0.0 {
        out.push(Check::info("degiorgi.threshold", "w vanishes on the window; nothing to check"));
        return Ok(out);
    }
    let e = degiorgi_energy(traj, FieldName::W, m, t_star, 8)?;
    let mut worst: f64 = 0.0;
    for k in 2..8 {
        let (wk, wk1) = (e.values[k], e.values[k + 1]);
        let slack = 1e-14 * w0;
        if wk1 > tol.level_ratio * wk + slack {
            worst = worst.max(if wk > 0.0 { wk1 / wk } else { f64::INFINITY });
        } else if wk > 0.0 {
            worst = worst.max(wk1 / wk);
        }
    }
    out.push(Check::bound(
        "degiorgi.ratio",
        worst,
        tol.level_ratio,
        format!(" (max W_k+1/W_k, k in 2..8; M = {m:.4e}, W0 = {w0:.4e}, t* = {t_star})"),
    ));
    let sup = traj
        .snapshots
        .iter()
        .filter(|s| s.t() >= 0.5 * t_star)
        .filter_map(|s| s.field(FieldName::W).map(Field::max))
        .fold(0.0, f64::max);
    if sup > 0.0 {
        let tight = degiorgi_energy(traj, FieldName::W, sup, t_star, 8)?;
        let ratios: Vec<String> = (2..8)
            .map(|k| {
                let (a, b) = (tight.values[k], tight.values[k + 1]);
                if a > 0.0 {
                    format!("{:.3}", b / a)
                } else {
                    "-".into()
                }
            })
            .collect();
        out.push(Check::info(
            "degiorgi.tight",
            format!("M = sup w = {sup:.4e}, W_k+1/W_k = [{}]", ratios.join(", ")),
        ));
    }
    Ok(out)
}

fn envelope_check(traj: &Trajectory, gamma: f64, limit: f64, t_min: f64) -> Check {
    let name = if gamma.is_infinite() {
        "envelope.linf".to_string()
    } else {
        format!("envelope.l{gamma}")
    };
    match norm_series(traj, &[FieldName::U], gamma).and_then(|s| fit_envelope(&s, t_min)) {
        Ok(fit) => {
            let mut c = Check::bound(
                &name,
                fit.envelope.beta,
                limit,
                format!(
                    " (C = {:.4e}, {} points, {:.0}% within 10%)",
                    fit.envelope.c,
                    fit.points,
                    100.0 * fit.within_10pct
                ),
            );
            c.detail = format!("beta {}", c.detail);
            c
        }
        Err(e) => Check::failed(&name, e),
    }
}

/// Runs the diagnostics applicable to `traj`. `paired`, when given, is a
/// run from perturbed initial data on the same grid.
pub fn verify_estimates(traj: &Trajectory, paired: Option<&Trajectory>, tol: &EstimateTolerances) -> Report {
    let mut report = Report::default();
    let checks = &mut report.checks;
    checks.push(Check::bound("mass", mass_drift(traj), tol.mass_rel, " (relative drift)"));
    checks.push(Check::info("outcome", crate::archive::outcome_line(&traj.outcome)));
    if traj.kind == ModelKind::Ks {
        let maxes = column(traj, "max_rho");
        checks.push(Check::info(
            "ks.max",
            format!("initial {:.4e}, final {:.4e}", maxes.first().unwrap_or(&0.0), maxes.last().unwrap_or(&0.0)),
        ));
        return report;
    }

    let init_max = ["max_u", "max_w", "max_c"]
        .iter()
        .filter_map(|k| column(traj, k).first().copied())
        .fold(0.0, f64::max);
    let min = ["min_u", "min_w", "min_c"]
        .iter()
        .flat_map(|k| column(traj, k))
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::bound(
        "positivity",
        (-min).max(0.0),
        tol.positivity_rel * init_max,
        format!(" (negative part of u, w, c; initial max {init_max:.4e})"),
    ));

    for (gamma, limit) in [(2.0, tol.beta_l2), (4.0, tol.beta_l4), (f64::INFINITY, tol.beta_linf)] {
        checks.push(envelope_check(traj, gamma, limit, tol.t_min));
    }

    let total: Vec<f64> = column(traj, "max_u")
        .iter()
        .zip(column(traj, "max_w"))
        .map(|(a, b)| a + b)
        .collect();
    if let Some(&first) = total.first() {
        let peak = total.iter().copied().fold(0.0, f64::max);
        checks.push(Check::bound(
            "bound.growth",
            peak,
            tol.growth_factor * first,
            " (max of |u|inf + |w|inf against 10x initial)",
        ));
        let (head, tail) = decile_means(&total);
        checks.push(Check::bound("bound.trend", tail, tol.trend_factor * head, " (last-decile mean)"));
    }

    let t_end = traj.last().t();
    match degiorgi_checks(traj, 0.2 * t_end, tol) {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::failed("degiorgi", e)),
    }

    let last_u = traj.last().field(FieldName::U);
    for alpha in [1.0, 2.0, 3.0] {
        let name = format!("gns.alpha{alpha}");
        match last_u.map(|u| gns_ratio(u, alpha)) {
            Some(Ok(r)) => checks.push(Check::info(&name, format!("ratio {r:.4e} on the final u"))),
            Some(Err(DiagnosticsError::Domain(m))) => checks.push(Check::info(&name, m)),
            Some(Err(e)) => checks.push(Check::failed(&name, e)),
            None => {}
        }
    }

    if let Some(other) = paired {
        match stability_gap(traj, other) {
            Ok(gap) if gap.rate.is_finite() => checks.push(Check {
                name: "stability".into(),
                status: Status::Pass,
                detail: format!("g(t) <= g(0) e^(C t) with g(0) = {:.4e}, C = {:.4e}", gap.g0, gap.rate),
            }),
            Ok(gap) => checks.push(Check::failed("stability", format!("gap appeared from g(0) = {:e}", gap.g0))),
            Err(e) => checks.push(Check::failed("stability", e)),
        }
    }
    report
}

/// Largest `max(rho)` or `max(u) + max(w)` over the stored snapshots.
pub fn peak_max_norm(traj: &Trajectory) -> f64 {
    traj.snapshots
        .iter()
        .map(|s| match s {
            SimState::Foraging(f) => f.u.max() + f.w.max(),
            SimState::KellerSegel(k) => k.rho.max(),
        })
        .fold(0.0, f64::max)
}
