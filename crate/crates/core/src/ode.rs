//! Delayed-supremum ODE `X' = -a X^alpha + b + c (1 + t^-gamma) sup X^alpha0`,
//! its power-law envelope, and a pointwise comparison checker.

use std::collections::VecDeque;

use thiserror::Error;

/// Values beyond this count as divergence.
pub const OVERFLOW: f64 = 1e300;
/// Relative tolerance of [`comparison_check`].
pub const COMPARISON_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid ODE parameter: {0}")]
    Domain(String),
    #[error("solution diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("no power-of-two constant up to 2^64 gives a super-solution")]
    SearchFailed,
    #[error("time grids differ: {0}")]
    Misaligned(String),
}

/// Window of the supremum term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupWindow {
    /// `[t/2, t]`.
    Half,
    /// `[tau, t]`.
    From(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub gamma: f64,
    pub x0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub window: SupWindow,
}

impl OdeParams {
    pub fn validate(&self) -> Result<(), OdeError> {
        let bad = |m: String| Err(OdeError::Domain(m));
        let all = [
            self.a,
            self.b,
            self.c,
            self.alpha,
            self.alpha0,
            self.gamma,
            self.x0,
            self.t_end,
            self.dt,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if !(self.a > 0.0) {
            return bad(format!("a must be positive, got {}", self.a));
        }
        if self.b < 0.0 || self.c < 0.0 || self.gamma < 0.0 || self.x0 < 0.0 {
            return bad("b, c, gamma and X0 must be nonnegative".into());
        }
        if !(self.alpha > self.alpha0 && self.alpha0 >= 0.0) {
            return bad(format!(
                "need alpha > alpha0 >= 0, got alpha = {}, alpha0 = {}",
                self.alpha, self.alpha0
            ));
        }
        if !(self.t_end > 0.0 && self.dt > 0.0 && self.dt <= self.t_end / 100.0) {
            return bad(format!("need 0 < dt <= T/100, got dt = {}, T = {}", self.dt, self.t_end));
        }
        if let SupWindow::From(tau) = self.window {
            if !(tau >= 0.0 && tau < self.t_end) {
                return bad(format!("tau must lie in [0, T), got {tau}"));
            }
        }
        Ok(())
    }

    /// Integration starts at `t = dt` only when `t^-gamma` actually
    /// multiplies something at the origin.
    pub fn t_start(&self) -> f64 {
        if self.c > 0.0 && self.gamma > 0.0 {
            self.dt
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

impl OdeSeries {
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.x.iter().copied()).collect()
    }
}

/// Running maximum of stored node values over a window whose left end only
/// moves right.
struct SlidingMax {
    q: VecDeque<(usize, f64)>,
}

impl SlidingMax {
    fn push(&mut self, i: usize, v: f64) {
        while self.q.back().is_some_and(|&(_, b)| b <= v) {
            self.q.pop_back();
        }
        self.q.push_back((i, v));
    }

    fn max_from(&mut self, lo: usize) -> f64 {
        while self.q.len() > 1 && self.q.front().is_some_and(|&(i, _)| i < lo) {
            self.q.pop_front();
        }
        self.q.front().map_or(f64::NEG_INFINITY, |&(i, v)| if i >= lo { v } else { f64::NEG_INFINITY })
    }
}

/// Integrates the equality case with classical RK4. The supremum at each
/// stage runs over the stored nodes from the one at or before the window
/// start, together with the stage value itself.
pub fn integrate_sup_ode(p: &OdeParams) -> Result<OdeSeries, OdeError> {
    p.validate()?;
    let t0 = p.t_start();
    let h = p.dt;
    let steps = ((p.t_end - t0) / h).round() as usize;
    let pow0 = |x: f64| if p.alpha0 == 0.0 { 1.0 } else { x.max(0.0).powf(p.alpha0) };
    let rhs = |t: f64, x: f64, sup_x: f64| {
        let decay = -p.a * x.max(0.0).powf(p.alpha) + p.b;
        if p.c == 0.0 {
            return decay;
        }
        let weight = if p.gamma == 0.0 { 2.0 } else { 1.0 + t.powf(-p.gamma) };
        decay + p.c * weight * pow0(sup_x)
    };
    let window_lo = |t: f64| {
        let start = match p.window {
            SupWindow::Half => 0.5 * t,
            SupWindow::From(tau) => tau,
        };
        ((start - t0) / h).floor().max(0.0) as usize
    };
    let mut ts = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    ts.push(t0);
    xs.push(p.x0);
    let mut hist = SlidingMax { q: VecDeque::new() };
    hist.push(0, p.x0);
    let mut x = p.x0;
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let mut stage = |s: f64, xs_: f64| {
            let sup = hist.max_from(window_lo(s)).max(xs_);
            rhs(s, xs_, sup)
        };
        let k1 = stage(t, x);
        let k2 = stage(t + 0.5 * h, x + 0.5 * h * k1);
        let k3 = stage(t + 0.5 * h, x + 0.5 * h * k2);
        let k4 = stage(t + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let tn = t0 + (n + 1) as f64 * h;
        if !x.is_finite() || x.abs() > OVERFLOW {
            return Err(OdeError::Divergence { t: tn });
        }
        ts.push(tn);
        xs.push(x);
        hist.push(n + 1, x);
    }
    Ok(OdeSeries { t: ts, x: xs })
}

/// `beta = max{1/(alpha - 1), gamma/(alpha - alpha0)}`.
pub fn envelope_exponent(alpha: f64, alpha0: f64, gamma: f64) -> Result<f64, OdeError> {
    if !(alpha > 1.0) {
        return Err(OdeError::Domain(format!("the envelope needs alpha > 1, got {alpha}")));
    }
    if !(alpha > alpha0 && alpha0 >= 0.0 && gamma >= 0.0) {
        return Err(OdeError::Domain("need alpha > alpha0 >= 0 and gamma >= 0".into()));
    }
    Ok((1.0 / (alpha - 1.0)).max(gamma / (alpha - alpha0)))
}

/// Constant of the bounded-case estimate with `gamma = 0`:
/// `C_delta = (2/a)(b + delta + eps^-r')` where `eps^r = a/(4c)`,
/// `r = alpha/alpha0` and `r'` its conjugate exponent.
pub fn bounded_case_constant(a: f64, b: f64, c: f64, alpha: f64, alpha0: f64, delta: f64) -> Result<f64, OdeError> {
    if !(a > 0.0 && c > 0.0 && alpha > alpha0 && alpha0 > 0.0 && delta >= 0.0 && b >= 0.0) {
        return Err(OdeError::Domain("need a, c, alpha0 > 0, alpha > alpha0, b, delta >= 0".into()));
    }
    let r = alpha / alpha0;
    let r_conj = r / (r - 1.0);
    let eps = (a / (4.0 * c)).powf(1.0 / r);
    Ok(2.0 / a * (b + delta + eps.powf(-r_conj)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEnvelope {
    pub c: f64,
    pub beta: f64,
}

impl PowerEnvelope {
    pub fn value(&self, t: f64) -> f64 {
        self.c * (1.0 + t.powf(-self.beta))
    }
}

fn is_super_solution(p: &OdeParams, env: &PowerEnvelope, grid: &[f64]) -> bool {
    let (c, beta) = (env.c, env.beta);
    grid.iter().all(|&t| {
        let y = env.value(t);
        let dy = -c * beta * t.powf(-beta - 1.0);
        let weight = if p.gamma == 0.0 { 2.0 } else { 1.0 + t.powf(-p.gamma) };
        let sup = match p.window {
            // Y is decreasing, so the window sup sits at its left end
            SupWindow::Half => env.value(0.5 * t),
            SupWindow::From(tau) if tau > 0.0 => env.value(tau.min(t)),
            SupWindow::From(_) => f64::INFINITY,
        };
        let sup0 = if p.alpha0 == 0.0 { 1.0 } else { sup.powf(p.alpha0) };
        dy + p.a * y.powf(p.alpha) >= p.b + p.c * weight * sup0
    })
}

/// `C (1 + t^-beta)` with `C` twice the smallest power of two for which the
/// envelope is a super-solution on a logarithmic grid over
/// `[1e-6, 1e3 max(1, T)]` and dominates `X0` at the start time.
pub fn corollary_a2_envelope(p: &OdeParams) -> Result<PowerEnvelope, OdeError> {
    p.validate()?;
    let beta = envelope_exponent(p.alpha, p.alpha0, p.gamma)?;
    let (lo, hi) = (1e-6f64, 1e3 * p.t_end.max(1.0));
    let n = 2000;
    let grid: Vec<f64> = (0..=n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / n as f64).exp())
        .collect();
    let t0 = p.t_start();
    for e in -20..=64 {
        let env = PowerEnvelope { c: 2f64.powi(e), beta };
        let covers_start = t0 == 0.0 || env.value(t0) >= p.x0;
        if covers_start && is_super_solution(p, &env, &grid) {
            return Ok(PowerEnvelope { c: 2.0 * env.c, beta });
        }
    }
    Err(OdeError::SearchFailed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub holds: bool,
    pub first_violation: Option<f64>,
}

/// Checks `Y >= X - tol * scale` on shared nodes, `scale` being the largest
/// magnitude in either series.
pub fn comparison_check(y: &[(f64, f64)], x: &[(f64, f64)]) -> Result<Comparison, OdeError> {
    if y.len() != x.len() {
        return Err(OdeError::Misaligned(format!("{} vs {} nodes", y.len(), x.len())));
    }
    for (a, b) in y.iter().zip(x) {
        if (a.0 - b.0).abs() > 1e-12 * a.0.abs().max(1.0) {
            return Err(OdeError::Misaligned(format!("node at {} vs {}", a.0, b.0)));
        }
    }
    let scale = y
        .iter()
        .chain(x)
        .map(|p| p.1.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let tol = COMPARISON_TOL * scale;
    let first_violation = y.iter().zip(x).find(|(a, b)| !(a.1 >= b.1 - tol)).map(|(a, _)| a.0);
    Ok(Comparison {
        holds: first_violation.is_none(),
        first_violation,
    })
}
