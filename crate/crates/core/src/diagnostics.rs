//! Post-processing of trajectories: norm series, upper envelopes
//! `C (1 + t^-beta)`, De Giorgi level-set energies and threshold, the
//! Gagliardo–Nirenberg–Sobolev ratio, and the paired-run stability gap.

use thiserror::Error;

use crate::grid::{dirichlet_energy, integrate, lp_norm, Field, GridError};
use crate::models::{FieldName, SimState, Trajectory};

/// Margin added to nominal exponents that the estimates state as "slightly
/// above" a value.
pub const EPS_PLUS: f64 = 0.05;
/// Minimum number of points for an envelope fit.
pub const MIN_FIT_POINTS: usize = 10;
/// Minimum number of snapshots in the last level-set window.
pub const MIN_LEVEL_SNAPSHOTS: usize = 5;
const BETA_MAX: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("field {0} is not recorded in this trajectory")]
    MissingField(FieldName),
    #[error("need at least {needed} points, have {have}")]
    TooFewPoints { needed: usize, have: usize },
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("trajectories do not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `(t, value)` pairs.
pub type Series = Vec<(f64, f64)>;

fn sum_fields(state: &SimState, which: &[FieldName]) -> Result<Field, DiagnosticsError> {
    let mut it = which.iter();
    let first = it
        .next()
        .ok_or_else(|| DiagnosticsError::Domain("no field selected".into()))?;
    let mut acc = state.field(*first).ok_or(DiagnosticsError::MissingField(*first))?.clone();
    for name in it {
        let f = state.field(*name).ok_or(DiagnosticsError::MissingField(*name))?;
        acc = acc.zip_map(f, |a, b| a + b)?;
    }
    Ok(acc)
}

/// `||sum of the selected fields||_gamma` at every snapshot.
pub fn norm_series(traj: &Trajectory, which: &[FieldName], gamma: f64) -> Result<Series, DiagnosticsError> {
    traj.snapshots
        .iter()
        .map(|s| Ok((s.t(), lp_norm(&sum_fields(s, which)?, gamma)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub c: f64,
    pub beta: f64,
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        self.c * (1.0 + t.powf(-self.beta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub envelope: Envelope,
    /// Largest `(envelope - v) / v` over the fitted points.
    pub max_overshoot: f64,
    /// Fraction of points with `envelope <= 1.1 v`.
    pub within_10pct: f64,
    pub points: usize,
}

fn envelope_for_beta(pts: &[(f64, f64)], beta: f64) -> (f64, f64) {
    let c = pts
        .iter()
        .map(|&(t, v)| v / (1.0 + t.powf(-beta)))
        .fold(0.0, f64::max);
    let over = pts
        .iter()
        .filter(|&&(_, v)| v > 0.0)
        .map(|&(t, v)| (c * (1.0 + t.powf(-beta)) - v) / v)
        .fold(0.0, f64::max);
    (c, over)
}

/// Smallest dominating envelope: for each `beta` the constant is the least
/// `C` with `C (1 + t^-beta) >= v` at every point, and `beta` minimizes the
/// largest relative overshoot. A coarse scan over `[0, 4]` is refined twice.
pub fn fit_envelope(series: &[(f64, f64)], t_min: f64) -> Result<EnvelopeFit, DiagnosticsError> {
    if let Some(i) = series.iter().position(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(DiagnosticsError::NonFinite(i));
    }
    if !(t_min > 0.0) {
        return Err(DiagnosticsError::Domain(format!("t_min must be positive, got {t_min}")));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= t_min).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(DiagnosticsError::TooFewPoints {
            needed: MIN_FIT_POINTS,
            have: pts.len(),
        });
    }
    if pts.iter().any(|&(_, v)| v < 0.0) {
        return Err(DiagnosticsError::Domain("envelope values must be nonnegative".into()));
    }
    if pts.iter().all(|&(_, v)| v == 0.0) {
        return Err(DiagnosticsError::Domain("series is identically zero".into()));
    }
    let mut best = (0.0, f64::INFINITY);
    let scan = |lo: f64, hi: f64, steps: usize, best: &mut (f64, f64)| {
        for k in 0..=steps {
            let beta = (lo + (hi - lo) * k as f64 / steps as f64).clamp(0.0, BETA_MAX);
            let (_, over) = envelope_for_beta(&pts, beta);
            if over < best.1 {
                *best = (beta, over);
            }
        }
    };
    scan(0.0, BETA_MAX, 400, &mut best);
    let b = best.0;
    scan(b - 0.01, b + 0.01, 200, &mut best);
    let b = best.0;
    scan(b - 1e-4, b + 1e-4, 200, &mut best);
    let (c, over) = envelope_for_beta(&pts, best.0);
    let envelope = Envelope { c, beta: best.0 };
    let within = pts
        .iter()
        .filter(|&&(t, v)| envelope.value(t) <= 1.1 * v)
        .count();
    Ok(EnvelopeFit {
        envelope,
        max_overshoot: over,
        within_10pct: within as f64 / pts.len() as f64,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetEnergySeries {
    pub m: f64,
    pub t_star: f64,
    pub t_end: f64,
    pub levels: Vec<f64>,
    pub times: Vec<f64>,
    /// `W_k`, the sum of the two parts below.
    pub values: Vec<f64>,
    pub sup_part: Vec<f64>,
    pub gradient_part: Vec<f64>,
}

/// `lambda_k = (1 - 2^-k) M`.
pub fn level(m: f64, k: usize) -> f64 {
    (1.0 - 0.5f64.powi(k as i32)) * m
}

/// `t_k = (1 - 2^-(k+1)) t_star`.
pub fn level_time(t_star: f64, k: usize) -> f64 {
    (1.0 - 0.5f64.powi(k as i32 + 1)) * t_star
}

/// `W_k = sup_{[t_k, T]} int w_k^2 + int_{t_k}^T int |grad w_k|^2` with
/// `w_k = (f - lambda_k)_+`, `f` the chosen field and `T` the last snapshot.
/// The time integral is the trapezoid rule over snapshots, with the
/// integrand interpolated at `t_k`.
pub fn degiorgi_energy(
    traj: &Trajectory,
    field: FieldName,
    m: f64,
    t_star: f64,
    k_max: usize,
) -> Result<LevelSetEnergySeries, DiagnosticsError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(DiagnosticsError::Domain(format!("M must be positive, got {m}")));
    }
    let t_end = traj.snapshots.last().map(SimState::t).unwrap_or(0.0);
    if !(t_star > 0.0 && t_star < t_end) {
        return Err(DiagnosticsError::Domain(format!(
            "need 0 < t_star < T, got t_star = {t_star}, T = {t_end}"
        )));
    }
    let fields: Vec<(f64, &Field)> = traj
        .snapshots
        .iter()
        .map(|s| s.field(field).map(|f| (s.t(), f)).ok_or(DiagnosticsError::MissingField(field)))
        .collect::<Result<_, _>>()?;
    let last_window = fields.iter().filter(|(t, _)| *t >= level_time(t_star, k_max)).count();
    if last_window < MIN_LEVEL_SNAPSHOTS {
        return Err(DiagnosticsError::TooFewPoints {
            needed: MIN_LEVEL_SNAPSHOTS,
            have: last_window,
        });
    }
    let mut out = LevelSetEnergySeries {
        m,
        t_star,
        t_end,
        levels: Vec::new(),
        times: Vec::new(),
        values: Vec::new(),
        sup_part: Vec::new(),
        gradient_part: Vec::new(),
    };
    for k in 0..=k_max {
        let (lam, tk) = (level(m, k), level_time(t_star, k));
        // (t, int w_k^2, int |grad w_k|^2) from the last snapshot before t_k on
        let first = fields.iter().rposition(|(t, _)| *t <= tk).unwrap_or(0);
        let samples: Vec<(f64, f64, f64)> = fields[first..]
            .iter()
            .map(|(t, f)| {
                let wk = f.map(|v| (v - lam).max(0.0))?;
                let l2 = integrate(&wk.map(|v| v * v)?);
                Ok((*t, l2, dirichlet_energy(&wk)))
            })
            .collect::<Result<_, GridError>>()?;
        let sup = samples
            .iter()
            .filter(|(t, _, _)| *t >= tk)
            .map(|s| s.1)
            .fold(0.0, f64::max);
        let mut grad = 0.0;
        for pair in samples.windows(2) {
            let ((t0, _, e0), (t1, _, e1)) = (pair[0], pair[1]);
            if t1 <= tk {
                continue;
            }
            let (a, ea) = if t0 < tk {
                (tk, e0 + (e1 - e0) * (tk - t0) / (t1 - t0))
            } else {
                (t0, e0)
            };
            grad += 0.5 * (ea + e1) * (t1 - a);
        }
        out.levels.push(lam);
        out.times.push(tk);
        out.sup_part.push(sup);
        out.gradient_part.push(grad);
        out.values.push(sup + grad);
    }
    Ok(out)
}

/// Level `M` above which the level-set energies are forced to vanish:
/// `max{ sqrt(2C(1+T) W0 / (a^2 t*)),
///       sqrt((2C(1+T))^(q/(q+1)) W0^(1/(q+1)) / a) * 2 / t*^(1/2 + eps) }`.
pub fn degiorgi_threshold(w0: f64, t_star: f64, t_end: f64, q: f64, a: f64, c: f64) -> Result<f64, DiagnosticsError> {
    if !(w0 >= 0.0 && w0.is_finite()) {
        return Err(DiagnosticsError::Domain(format!("W0 must be >= 0, got {w0}")));
    }
    if !(t_star > 0.0 && t_end > t_star) {
        return Err(DiagnosticsError::Domain(format!(
            "need 0 < t_star < T, got {t_star}, {t_end}"
        )));
    }
    if !(q > 1.0) {
        return Err(DiagnosticsError::Domain(format!("q must exceed 1, got {q}")));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(DiagnosticsError::Domain(format!("a must lie in (0, 1), got {a}")));
    }
    if !(c > 0.0) {
        return Err(DiagnosticsError::Domain(format!("C must be positive, got {c}")));
    }
    let k = 2.0 * c * (1.0 + t_end);
    let first = (k * w0 / (a * a * t_star)).sqrt();
    let second = (k.powf(q / (q + 1.0)) * w0.powf(1.0 / (q + 1.0)) / a).sqrt() * 2.0 / t_star.powf(0.5 + EPS_PLUS);
    Ok(first.max(second))
}

/// `int f^(a+1) / (int f * (int f^a + int |grad f^(a/2)|^2))`.
pub fn gns_ratio(f: &Field, alpha: f64) -> Result<f64, DiagnosticsError> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(DiagnosticsError::Domain(format!("alpha must be >= 1, got {alpha}")));
    }
    if f.min() < 0.0 {
        return Err(DiagnosticsError::Domain(format!("field must be nonnegative, min is {:e}", f.min())));
    }
    let mass = integrate(f);
    if !(mass > 0.0) {
        return Err(DiagnosticsError::Domain("field is identically zero".into()));
    }
    let num = integrate(&f.map(|v| v.powf(alpha + 1.0))?);
    let pa = integrate(&f.map(|v| v.powf(alpha))?);
    let grad = dirichlet_energy(&f.map(|v| v.powf(alpha / 2.0))?);
    Ok(num / (mass * (pa + grad)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGap {
    /// `(t, ||u_A - u_B||_2 + ||w_A - w_B||_2)` at each shared snapshot.
    pub series: Series,
    pub g0: f64,
    /// Smallest `C` with `g(t) <= g(0) e^(C t)` at every snapshot; negative
    /// when the gap contracts, infinite when `g(0) = 0` but a gap appears.
    pub rate: f64,
}

/// Gap between two foraging runs from perturbed initial data.
pub fn stability_gap(a: &Trajectory, b: &Trajectory) -> Result<StabilityGap, DiagnosticsError> {
    if a.grid != b.grid {
        return Err(DiagnosticsError::Mismatch("grids differ".into()));
    }
    if a.kind != b.kind {
        return Err(DiagnosticsError::Mismatch("model kinds differ".into()));
    }
    if a.snapshots.len() != b.snapshots.len() {
        return Err(DiagnosticsError::Mismatch(format!(
            "{} vs {} snapshots",
            a.snapshots.len(),
            b.snapshots.len()
        )));
    }
    let mut series = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let (ta, tb) = (sa.t(), sb.t());
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(DiagnosticsError::Mismatch(format!("snapshot times {ta} vs {tb}")));
        }
        let mut g = 0.0;
        for name in [FieldName::U, FieldName::W] {
            let fa = sa.field(name).ok_or(DiagnosticsError::MissingField(name))?;
            let fb = sb.field(name).ok_or(DiagnosticsError::MissingField(name))?;
            g += lp_norm(&fa.zip_map(fb, |x, y| x - y)?, 2.0)?;
        }
        series.push((ta, g));
    }
    let g0 = series.first().map(|s| s.1).unwrap_or(0.0);
    let rate = if g0 > 0.0 {
        series
            .iter()
            .filter(|(t, _)| *t > 0.0)
            .map(|&(t, g)| (g / g0).ln() / t)
            .fold(f64::NEG_INFINITY, f64::max)
    } else if series.iter().all(|s| s.1 == 0.0) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(StabilityGap {
        series,
        g0,
        rate: if rate == f64::NEG_INFINITY { 0.0 } else { rate },
    })
}
