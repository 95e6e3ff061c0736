//! Uniform cell-centered rectangular mesh and the discrete zero-flux operators
//! shared by every model.
//!
//! Cells are indexed `(i, j)` with `i` along x and `j` along y; storage is
//! row-major with `j` outer. Face arrays follow the same convention:
//! x-faces are `(nx + 1) * ny` values indexed `j * (nx + 1) + i` (face `i`
//! sits at `x = i * dx`), y-faces are `nx * (ny + 1)` values indexed
//! `j * nx + i` (face `j` sits at `y = j * dy`).

use rayon::prelude::*;
use thiserror::Error;

/// Smallest admissible cell count along either axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {MIN_CELLS} cells per axis, got {nx}x{ny}")]
    TooFewCells { nx: usize, ny: usize },
    #[error("domain extents must be positive and finite, got {lx} x {ly}")]
    BadExtent { lx: f64, ly: f64 },
    #[error("field has {actual} values, grid expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("field contains a non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("transported density is negative ({value:e}) at cell {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("face velocity has a nonzero normal component on the boundary")]
    BoundaryFlux,
    #[error("norm exponent must be >= 1, got {0}")]
    BadExponent(f64),
}

/// Uniform rectangular mesh on `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(GridError::TooFewCells { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GridError::BadExtent { lx, ly });
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell center of `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

/// Builds a grid; alias of [`Grid::new`].
pub fn make_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid, GridError> {
    Grid::new(nx, ny, lx, ly)
}

/// Cell-centered scalar field. Values are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Wraps values produced by an operator that cannot create non-finite
    /// entries from finite inputs. Length is still checked in debug builds.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, k: f64) -> Result<Self, GridError> {
        self.map(|v| k * v)
    }

    /// Mirror image across the vertical line `x = lx / 2`.
    pub fn reflect_x(&self) -> Self {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                out[g.idx(i, j)] = self.at(g.nx() - 1 - i, j);
            }
        }
        Self::from_raw(g, out)
    }
}

/// Face-normal velocities on the staggered faces of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVelocity {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceVelocity {
    /// With `zero_flux` set, the normal components on the four walls are
    /// overwritten with exact zeros.
    pub fn new(grid: Grid, x: Vec<f64>, y: Vec<f64>, zero_flux: bool) -> Result<Self, GridError> {
        if x.len() != grid.x_faces() {
            return Err(GridError::LengthMismatch {
                expected: grid.x_faces(),
                actual: x.len(),
            });
        }
        if y.len() != grid.y_faces() {
            return Err(GridError::LengthMismatch {
                expected: grid.y_faces(),
                actual: y.len(),
            });
        }
        if let Some(index) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        let mut vel = Self { grid, x, y };
        if zero_flux {
            vel.clear_walls();
        }
        Ok(vel)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.x_faces()],
            y: vec![0.0; grid.y_faces()],
        }
    }

    fn clear_walls(&mut self) {
        let g = self.grid;
        for j in 0..g.ny() {
            self.x[j * (g.nx() + 1)] = 0.0;
            self.x[j * (g.nx() + 1) + g.nx()] = 0.0;
        }
        for i in 0..g.nx() {
            self.y[i] = 0.0;
            self.y[g.ny() * g.nx() + i] = 0.0;
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    /// Velocity on x-face `i` (between cells `i-1` and `i`) of row `j`.
    #[inline]
    pub fn xf(&self, i: usize, j: usize) -> f64 {
        self.x[j * (self.grid.nx() + 1) + i]
    }

    /// Velocity on y-face `j` (between cells `j-1` and `j`) of column `i`.
    #[inline]
    pub fn yf(&self, i: usize, j: usize) -> f64 {
        self.y[j * self.grid.nx() + i]
    }

    pub fn is_zero_flux(&self) -> bool {
        let g = self.grid;
        (0..g.ny()).all(|j| self.xf(0, j) == 0.0 && self.xf(g.nx(), j) == 0.0)
            && (0..g.nx()).all(|i| self.yf(i, 0) == 0.0 && self.yf(i, g.ny()) == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, k: f64) -> Self {
        assert!(k.is_finite(), "velocity scale must be finite");
        Self {
            grid: self.grid,
            x: self.x.iter().map(|v| k * v).collect(),
            y: self.y.iter().map(|v| k * v).collect(),
        }
    }

    /// Per-cell total outflow rate `sum(max(outward normal velocity, 0) / h)`.
    /// An explicit upwind update keeps a cell nonnegative when
    /// `dt * outflow_rate <= 1`.
    pub fn outflow_rates(&self) -> Vec<f64> {
        let g = self.grid;
        let (dx, dy) = (g.dx(), g.dy());
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(g.nx()).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let east = self.xf(i + 1, j).max(0.0);
                let west = (-self.xf(i, j)).max(0.0);
                let north = self.yf(i, j + 1).max(0.0);
                let south = (-self.yf(i, j)).max(0.0);
                *o = (east + west) / dx + (north + south) / dy;
            }
        });
        out
    }
}

/// Five-point Laplacian with homogeneous Neumann conditions (mirrored ghost
/// cells). Written in flux form so the discrete integral telescopes to zero.
pub fn laplacian_neumann(f: &Field) -> Field {
    let g = *f.grid();
    let mut out = vec![0.0; g.len()];
    laplacian_into(&g, f.values(), &mut out);
    Field::from_raw(g, out)
}

pub(crate) fn laplacian_into(g: &Grid, v: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let (idx2, idy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            let c = v[j * nx + i];
            let east = if i + 1 < nx { v[j * nx + i + 1] - c } else { 0.0 };
            let west = if i > 0 { c - v[j * nx + i - 1] } else { 0.0 };
            let north = if j + 1 < ny { v[(j + 1) * nx + i] - c } else { 0.0 };
            let south = if j > 0 { c - v[(j - 1) * nx + i] } else { 0.0 };
            *o = (east - west) * idx2 + (north - south) * idy2;
        }
    });
}

/// Centered differences on interior faces; wall faces carry zero normal
/// gradient.
pub fn gradient_faces(f: &Field) -> FaceVelocity {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = f.values();
    let mut x = vec![0.0; g.x_faces()];
    x.par_chunks_mut(nx + 1).enumerate().for_each(|(j, row)| {
        for i in 1..nx {
            row[i] = (v[j * nx + i] - v[j * nx + i - 1]) / g.dx();
        }
    });
    let mut y = vec![0.0; g.y_faces()];
    y.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        if j == 0 || j == ny {
            return;
        }
        for (i, o) in row.iter_mut().enumerate() {
            *o = (v[j * nx + i] - v[(j - 1) * nx + i]) / g.dy();
        }
    });
    FaceVelocity { grid: g, x, y }
}

/// Tolerance below which a transported density counts as negative, relative
/// to `max(1, ||f||_inf)`.
pub const NEGATIVITY_TOL: f64 = 1e-12;

/// First-order upwind divergence of the advective flux `f * vel`.
pub fn upwind_div(f: &Field, vel: &FaceVelocity) -> Result<Field, GridError> {
    let g = *f.grid();
    if *vel.grid() != g {
        return Err(GridError::GridMismatch);
    }
    if !vel.is_zero_flux() {
        return Err(GridError::BoundaryFlux);
    }
    let floor = -NEGATIVITY_TOL * f.max_abs().max(1.0);
    if let Some(index) = f.values().iter().position(|&v| v < floor) {
        return Err(GridError::NegativeDensity {
            index,
            value: f.values()[index],
        });
    }
    let (nx, ny) = (g.nx(), g.ny());
    let v = f.values();
    let upwind = |vel: f64, lo: f64, hi: f64| if vel > 0.0 { vel * lo } else { vel * hi };
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            let c = v[j * nx + i];
            let fe = if i + 1 < nx { upwind(vel.xf(i + 1, j), c, v[j * nx + i + 1]) } else { 0.0 };
            let fw = if i > 0 { upwind(vel.xf(i, j), v[j * nx + i - 1], c) } else { 0.0 };
            let fn_ = if j + 1 < ny { upwind(vel.yf(i, j + 1), c, v[(j + 1) * nx + i]) } else { 0.0 };
            let fs = if j > 0 { upwind(vel.yf(i, j), v[(j - 1) * nx + i], c) } else { 0.0 };
            *o = (fe - fw) / g.dx() + (fn_ - fs) / g.dy();
        }
    });
    Field::new(g, out)
}

/// Discrete integral `sum(f) * dx * dy`. Rows are summed first, then the row
/// sums in order, so the result does not depend on thread count.
pub fn integrate(f: &Field) -> f64 {
    let g = f.grid();
    let rows: Vec<f64> = f
        .values()
        .par_chunks(g.nx())
        .map(|row| row.iter().sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() * g.cell_area()
}

/// Discrete `L^gamma` norm; `gamma = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &Field, gamma: f64) -> Result<f64, GridError> {
    if gamma.is_nan() || gamma < 1.0 {
        return Err(GridError::BadExponent(gamma));
    }
    if gamma.is_infinite() {
        return Ok(f.max_abs());
    }
    let g = f.grid();
    let rows: Vec<f64> = f
        .values()
        .par_chunks(g.nx())
        .map(|row| {
            if gamma == 1.0 {
                row.iter().map(|v| v.abs()).sum::<f64>()
            } else if gamma == 2.0 {
                row.iter().map(|v| v * v).sum::<f64>()
            } else {
                row.iter().map(|v| v.abs().powf(gamma)).sum::<f64>()
            }
        })
        .collect();
    let s = rows.iter().sum::<f64>() * g.cell_area();
    Ok(if gamma == 1.0 {
        s
    } else if gamma == 2.0 {
        s.sqrt()
    } else {
        s.powf(1.0 / gamma)
    })
}

/// Discrete Dirichlet energy `sum over faces |grad f|^2 * dx * dy`, using the
/// same face gradient as the transport operators.
pub fn dirichlet_energy(f: &Field) -> f64 {
    let grad = gradient_faces(f);
    let g = f.grid();
    let sx: f64 = grad.x_values().iter().map(|v| v * v).sum();
    let sy: f64 = grad.y_values().iter().map(|v| v * v).sum();
    (sx + sy) * g.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_spacing() {
        let g = make_grid(4, 4, 1.0, 1.0).unwrap();
        assert_eq!((g.dx(), g.dy()), (0.25, 0.25));
        let g = make_grid(100, 50, 2.0, 1.0).unwrap();
        assert!((g.dx() - 0.02).abs() < 1e-15 && (g.dy() - 0.02).abs() < 1e-15);
        assert!(matches!(make_grid(3, 4, 1.0, 1.0), Err(GridError::TooFewCells { .. })));
        assert!(matches!(make_grid(4, 4, 0.0, 1.0), Err(GridError::BadExtent { .. })));
        assert!(make_grid(4, 4, -1.0, 1.0).is_err());
    }

    #[test]
    fn cell_centers() {
        let g = make_grid(4, 8, 1.0, 2.0).unwrap();
        assert_eq!(g.center(0, 0), (0.125, 0.125));
        assert_eq!(g.center(3, 7), (0.875, 1.875));
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = unit(4);
        assert!(matches!(Field::new(g, vec![0.0; 15]), Err(GridError::LengthMismatch { .. })));
        let mut v = vec![0.0; 16];
        v[5] = f64::NAN;
        assert_eq!(Field::new(g, v), Err(GridError::NonFinite { index: 5 }));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let f = Field::constant(unit(8), 3.7);
        assert!(laplacian_neumann(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_matches_cosine_mode() {
        let n = 256;
        let g = unit(n);
        let f = Field::from_fn(g, |x, _| (PI * x).cos()).unwrap();
        let lap = laplacian_neumann(&f);
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 1..n - 1 {
                let (x, _) = g.center(i, j);
                let exact = -PI * PI * (PI * x).cos();
                if exact.abs() > 1e-2 {
                    worst = worst.max(((lap.at(i, j) - exact) / exact).abs());
                }
            }
        }
        assert!(worst < 1e-3, "max relative interior error {worst}");
    }

    #[test]
    fn laplacian_of_spike_sums_to_zero() {
        let g = unit(16);
        let mut v = vec![0.0; g.len()];
        v[g.idx(5, 9)] = 1.0e3;
        let f = Field::new(g, v).unwrap();
        let total: f64 = laplacian_neumann(&f).values().iter().sum();
        let l1: f64 = f.values().iter().map(|v| v.abs()).sum();
        assert!(total.abs() <= 1e-13 * l1 * 16.0 * 16.0, "{total}");
    }

    #[test]
    fn gradient_examples() {
        let g = unit(4);
        let zero = gradient_faces(&Field::constant(g, 2.0));
        assert_eq!(zero.max_abs(), 0.0);

        let lin = gradient_faces(&Field::from_fn(g, |x, _| 3.0 * x).unwrap());
        for j in 0..4 {
            assert_eq!(lin.xf(0, j), 0.0);
            assert_eq!(lin.xf(4, j), 0.0);
            for i in 1..4 {
                assert!((lin.xf(i, j) - 3.0).abs() < 1e-14);
            }
        }
        assert!(lin.y_values().iter().all(|&v| v == 0.0));

        let sq = gradient_faces(&Field::from_fn(g, |x, _| x * x).unwrap());
        // (0.375^2 - 0.125^2) / 0.25
        assert!((sq.xf(1, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn upwind_examples() {
        let g = unit(4);
        let f = Field::constant(g, 1.0);
        let zero = upwind_div(&f, &FaceVelocity::zeros(g)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let a = 2.0;
        let vel = gradient_faces(&Field::from_fn(g, |x, _| a * x).unwrap());
        let div = upwind_div(&f, &vel).unwrap();
        for j in 0..4 {
            assert!((div.at(0, j) - a / g.dx()).abs() < 1e-12);
            assert!(div.at(1, j).abs() < 1e-12);
            assert!(div.at(2, j).abs() < 1e-12);
            assert!((div.at(3, j) + a / g.dx()).abs() < 1e-12);
        }
        assert!(integrate(&div).abs() < 1e-12);
    }

    #[test]
    fn upwind_rejects_negative_density_and_wall_flux() {
        let g = unit(4);
        let mut v = vec![1.0; 16];
        v[3] = -1e-6;
        let f = Field::new(g, v).unwrap();
        assert!(matches!(
            upwind_div(&f, &FaceVelocity::zeros(g)),
            Err(GridError::NegativeDensity { index: 3, .. })
        ));
        let vel = FaceVelocity::new(g, vec![1.0; g.x_faces()], vec![0.0; g.y_faces()], false).unwrap();
        assert_eq!(upwind_div(&Field::constant(g, 1.0), &vel), Err(GridError::BoundaryFlux));
        let walled = FaceVelocity::new(g, vec![1.0; g.x_faces()], vec![0.0; g.y_faces()], true).unwrap();
        assert!(walled.is_zero_flux());
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(integrate(&Field::constant(unit(8), 1.0)), 1.0);
        let g = Grid::new(8, 4, 2.0, 1.0).unwrap();
        assert_eq!(integrate(&Field::constant(g, 3.0)), 6.0);
        let half = Field::from_fn(unit(8), |x, _| if x < 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(integrate(&half), 0.5);
    }

    #[test]
    fn norm_examples() {
        let two = Field::constant(unit(8), 2.0);
        assert!((lp_norm(&two, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(lp_norm(&two, f64::INFINITY).unwrap(), 2.0);
        let half = Field::from_fn(unit(8), |x, _| if x < 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(lp_norm(&half, 1.0).unwrap(), 0.5);
        assert!((lp_norm(&two, 3.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(lp_norm(&two, 0.5), Err(GridError::BadExponent(0.5)));
    }

    #[test]
    fn reflection_commutes_with_laplacian() {
        let g = Grid::new(9, 6, 1.3, 0.7).unwrap();
        let f = Field::from_fn(g, |x, y| (3.1 * x).sin() * (1.0 + y * y) + x.exp()).unwrap();
        let a = laplacian_neumann(&f.reflect_x());
        let b = laplacian_neumann(&f).reflect_x();
        assert_eq!(a, b);
    }

    #[test]
    fn laplacian_is_second_order() {
        let err = |n: usize| {
            let g = unit(n);
            let f = Field::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos()).unwrap();
            let lap = laplacian_neumann(&f);
            let mut worst: f64 = 0.0;
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let (x, y) = g.center(i, j);
                    let exact = -5.0 * PI * PI * (PI * x).cos() * (2.0 * PI * y).cos();
                    worst = worst.max((lap.at(i, j) - exact).abs());
                }
            }
            worst
        };
        let (e64, e128, e256) = (err(64), err(128), err(256));
        for order in [(e64 / e128).log2(), (e128 / e256).log2()] {
            assert!((order - 2.0).abs() <= 0.2, "observed order {order}");
        }
    }
}
