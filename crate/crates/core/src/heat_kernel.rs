//! Free-space heat kernel, direct Duhamel quadrature on a grid, and the
//! gradient and sup bounds for heat flow with a source.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{integrate, Field, Grid, GridError};

/// Kernel support is cut at `TRUNCATION * sqrt(t)`.
pub const TRUNCATION: f64 = 12.0;
/// Cells from the wall inside which data counts as touching the boundary.
const BOUNDARY_BAND: usize = 3;
const BOUNDARY_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("dimension must be at least 1")]
    NoDimension,
    #[error("bound hypothesis violated: {0}")]
    Constraint(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `K(t, x) = (4 pi t)^(-n/2) exp(-|x|^2 / 4t)` with `n = x.len()`.
pub fn heat_kernel(t: f64, x: &[f64]) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    if x.is_empty() {
        return Err(KernelError::NoDimension);
    }
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((4.0 * std::f64::consts::PI * t).powf(-n / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// Dense 1D convolution weights: `w[i][k]` maps source cell `k` to target
/// cell `i`. Point samples when the kernel spans at least a cell, exact cell
/// averages (via erf) when it is narrower.
fn weights_1d(n: usize, h: f64, t: f64) -> Vec<f64> {
    let s = (4.0 * t).sqrt();
    let reach = TRUNCATION * t.sqrt();
    let resolved = (2.0 * t).sqrt() >= h;
    let norm = (4.0 * std::f64::consts::PI * t).sqrt();
    let mut w = vec![0.0; n * n];
    w.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (k, wk) in row.iter_mut().enumerate() {
            let d = (i as f64 - k as f64) * h;
            if d.abs() > reach + h {
                continue;
            }
            *wk = if resolved {
                h * (-d * d / (4.0 * t)).exp() / norm
            } else {
                0.5 * (libm::erf((d + 0.5 * h) / s) - libm::erf((d - 0.5 * h) / s))
            };
        }
    });
    w
}

/// `out = Wy * F * Wx^T` for row-major `F` (`ny` rows of `nx`).
fn separable_apply(g: &Grid, wx: &[f64], wy: &[f64], f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (g.nx(), g.ny());
    let mut tmp = vec![0.0; nx * ny];
    tmp.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let src = &f[j * nx..(j + 1) * nx];
        for (i, o) in row.iter_mut().enumerate() {
            let wrow = &wx[i * nx..(i + 1) * nx];
            *o = wrow.iter().zip(src).map(|(a, b)| a * b).sum();
        }
    });
    let mut out = vec![0.0; nx * ny];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let wrow = &wy[j * ny..(j + 1) * ny];
        for (k, &wk) in wrow.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let src = &tmp[k * nx..(k + 1) * nx];
            row.iter_mut().zip(src).for_each(|(o, s)| *o += wk * s);
        }
    });
    out
}

/// Free-space heat semigroup applied to grid data, `K(t) * f`.
pub fn heat_convolve(f: &Field, t: f64) -> Result<Field, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    let g = *f.grid();
    let wx = weights_1d(g.nx(), g.dx(), t);
    let wy = weights_1d(g.ny(), g.dy(), t);
    Ok(Field::new(g, separable_apply(&g, &wx, &wy, f.values()))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelOptions {
    /// Midpoint-rule substeps for the source integral.
    pub substeps: usize,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { substeps: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct DuhamelResult {
    pub field: Field,
    /// Set when the data carries non-negligible mass near the walls, where
    /// the free-space solution is cut off.
    pub boundary_warning: Option<String>,
}

fn boundary_mass(f: &Field) -> f64 {
    let g = f.grid();
    let b = BOUNDARY_BAND.min(g.nx() / 2).min(g.ny() / 2);
    let mut s = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if i < b || j < b || i + b >= g.nx() || j + b >= g.ny() {
                s += f.at(i, j).abs();
            }
        }
    }
    s * g.cell_area()
}

/// `phi(t) = K(t) * phi0 + int_0^t K(t - s) * f(s) ds`, restricted to the
/// grid. Convolutions are direct separable quadrature; the time integral is
/// the midpoint rule.
pub fn duhamel_solve(
    phi0: &Field,
    source: Option<&(dyn Fn(f64) -> Field + Sync)>,
    t: f64,
    opts: &DuhamelOptions,
) -> Result<DuhamelResult, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    let g = *phi0.grid();
    let mut out = heat_convolve(phi0, t)?.into_values();
    let total = phi0.values().iter().map(|v| v.abs()).sum::<f64>() * g.cell_area();
    let mut near_wall = boundary_mass(phi0);
    let mut scale = total;
    if let Some(src) = source {
        let m = opts.substeps.max(1);
        let h = t / m as f64;
        for k in 0..m {
            let s = (k as f64 + 0.5) * h;
            let fs = src(s);
            if fs.grid() != &g {
                return Err(GridError::GridMismatch.into());
            }
            near_wall = near_wall.max(boundary_mass(&fs) * t);
            scale = scale.max(integrate(&fs.map(f64::abs)?) * t);
            let part = heat_convolve(&fs, t - s)?;
            out.iter_mut().zip(part.values()).for_each(|(o, p)| *o += h * p);
        }
    }
    let boundary_warning = (near_wall > BOUNDARY_MASS_TOL * scale).then(|| {
        format!("data mass {near_wall:.3e} lies within {BOUNDARY_BAND} cells of the boundary; free-space solution is truncated")
    });
    Ok(DuhamelResult {
        field: Field::new(g, out)?,
        boundary_warning,
    })
}

/// Inputs of the gradient bound for `phi_t - Lap phi = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams41 {
    pub n: usize,
    /// Integrability exponent, `q > n`; `f64::INFINITY` allowed.
    pub q: f64,
    pub theta: f64,
    /// `||grad phi0||_q`.
    pub grad_phi0: f64,
    /// `sup_s ||f(s)||_1`.
    pub f_l1: f64,
    /// `sup_{t/2 <= s <= t} ||f(s)||_{q theta / 2}`.
    pub f_qtheta: f64,
    pub t: f64,
    pub c_n: f64,
}

fn conjugate(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

fn check_gradient_exponents(n: usize, q: f64, theta: f64) -> Result<(), KernelError> {
    let nf = n as f64;
    if n < 2 {
        return Err(KernelError::Constraint(format!("dimension n = {n} must be at least 2")));
    }
    if !(q > nf) {
        return Err(KernelError::Constraint(format!("q > n fails: q = {q}, n = {n}")));
    }
    if !(theta > 0.0 && theta <= 2.0) {
        return Err(KernelError::Constraint(format!("theta in (0, 2] fails: theta = {theta}")));
    }
    if !(theta * q / 2.0 > 1.0) {
        return Err(KernelError::Constraint(format!("theta q / 2 > 1 fails: {}", theta * q / 2.0)));
    }
    let sigma = if theta == 2.0 { f64::INFINITY } else { q * theta / (2.0 - theta) };
    if !(sigma > nf) {
        return Err(KernelError::Constraint(format!(
            "theta q / (2 - theta) > n fails: {sigma}"
        )));
    }
    Ok(())
}

/// Source exponent `(theta/n) (q(n-1) - n) / (theta q - 2)`; the `q = inf`
/// limit is `(n - 1)/n`.
pub fn gradient_bound_exponent(n: usize, q: f64, theta: f64) -> Result<f64, KernelError> {
    check_gradient_exponents(n, q, theta)?;
    let nf = n as f64;
    if q.is_infinite() {
        return Ok((nf - 1.0) / nf);
    }
    Ok(theta / nf * (q * (nf - 1.0) - nf) / (theta * q - 2.0))
}

/// The same exponent written as `s (n - q') / (n (s - q'))` with
/// `s = q theta / (2 - theta)`.
pub fn exponent_41_conjugate_form(n: usize, q: f64, theta: f64) -> Result<f64, KernelError> {
    check_gradient_exponents(n, q, theta)?;
    let nf = n as f64;
    let qp = conjugate(q);
    if theta == 2.0 || q.is_infinite() {
        // s -> infinity
        return Ok((nf - qp) / nf);
    }
    let s = q * theta / (2.0 - theta);
    Ok(s * (nf - qp) / (nf * (s - qp)))
}

/// Time exponent `(n - q') / (2 q')`.
pub fn gradient_time_exponent(n: usize, q: f64) -> f64 {
    let qp = conjugate(q);
    (n as f64 - qp) / (2.0 * qp)
}

/// Right-hand side of the gradient estimate:
/// `||grad phi0||_q + C (1 + t^-a)(1 + sup||f||_1) sup||f||_{q theta/2}^e`.
pub fn bound_lemma41(p: &BoundParams41) -> Result<f64, KernelError> {
    if !(p.t > 0.0) {
        return Err(KernelError::NonPositiveTime(p.t));
    }
    let e = gradient_bound_exponent(p.n, p.q, p.theta)?;
    for (name, v) in [
        ("grad_phi0", p.grad_phi0),
        ("f_l1", p.f_l1),
        ("f_qtheta", p.f_qtheta),
        ("c_n", p.c_n),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(KernelError::Constraint(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let a = gradient_time_exponent(p.n, p.q);
    Ok(p.grad_phi0 + p.c_n * (1.0 + p.t.powf(-a)) * (1.0 + p.f_l1) * p.f_qtheta.powf(e))
}

/// Inputs of the sup bound for `phi_t - Lap phi + div(phi grad v) = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams42 {
    pub n: usize,
    pub phi0_inf: f64,
    /// `sup_s ||f_+(s)||_1`.
    pub f_l1: f64,
    /// `sup_s ||phi(s)||_1`.
    pub phi_l1: f64,
    /// `sup_s ||f_+(s)||_inf`.
    pub f_inf: f64,
    pub grad_v_inf: f64,
    pub t_end: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `2||phi0||_inf + C1 (sup||f_+||_1 + sup||phi||_1) ||grad v||_inf^n`
/// plus `C2 sup||f_+||_inf^((n-1)/(n+1))`, with `C1` scaled by `ln(T + 1)`
/// in two dimensions.
pub fn bound_lemma42(p: &BoundParams42) -> Result<f64, KernelError> {
    if p.n < 2 {
        return Err(KernelError::Constraint(format!("dimension n = {} must be at least 2", p.n)));
    }
    if !(p.t_end >= 1.0) {
        return Err(KernelError::Constraint(format!("T >= 1 fails: T = {}", p.t_end)));
    }
    for (name, v) in [
        ("phi0_inf", p.phi0_inf),
        ("f_l1", p.f_l1),
        ("phi_l1", p.phi_l1),
        ("f_inf", p.f_inf),
        ("grad_v_inf", p.grad_v_inf),
        ("c1", p.c1),
        ("c2", p.c2),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(KernelError::Constraint(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let nf = p.n as f64;
    let c1 = if p.n == 2 { p.c1 * (p.t_end + 1.0).ln() } else { p.c1 };
    Ok(2.0 * p.phi0_inf
        + c1 * (p.f_l1 + p.phi_l1) * p.grad_v_inf.powi(p.n as i32)
        + p.c2 * p.f_inf.powf((nf - 1.0) / (nf + 1.0)))
}

/// Calibrated constant: the largest observed ratio times `safety`.
pub fn calibrate_constant(ratios: &[f64], safety: f64) -> Option<f64> {
    ratios
        .iter()
        .copied()
        .filter(|r| r.is_finite())
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
        .map(|m| m * safety)
}
