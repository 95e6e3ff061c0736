//! Quasi-static pheromone: `-Lap p + delta p = w` with zero-flux walls.

use crate::grid::{Field, GridError};
use crate::spectral::{NeumannSolver, Preconditioner, SolveError};

/// Default relative residual for every elliptic and implicit solve.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticSpec {
    /// Evaporation rate; zero selects the mean-zero gauge.
    pub delta: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl EllipticSpec {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            rel_tol: DEFAULT_REL_TOL,
            max_iter: 500,
            preconditioner: Preconditioner::Cosine,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(SolveError::BadSpec(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(SolveError::BadSpec(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.max_iter < 10 {
            return Err(SolveError::BadSpec(format!(
                "max_iter must be >= 10, got {}",
                self.max_iter
            )));
        }
        Ok(())
    }
}

/// Solves the screened Poisson problem with a fresh solver for `w`'s grid.
pub fn solve_screened_poisson(w: &Field, spec: &EllipticSpec) -> Result<Field, SolveError> {
    solve_with(&NeumannSolver::new(*w.grid()), w, spec)
}

/// As [`solve_screened_poisson`], reusing cached transforms.
///
/// For `delta == 0` the source is projected to mean zero first and the
/// returned potential has mean zero; only its gradient is physical.
pub fn solve_with(solver: &NeumannSolver, w: &Field, spec: &EllipticSpec) -> Result<Field, SolveError> {
    spec.validate()?;
    if solver.grid() != w.grid() {
        return Err(SolveError::GridMismatch);
    }
    let mut rhs = w.values().to_vec();
    if spec.delta == 0.0 {
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
    }
    let (p, _) = solver.solve(&rhs, spec.delta, 1.0, spec.rel_tol, spec.max_iter, spec.preconditioner)?;
    Field::new(*w.grid(), p).map_err(|e: GridError| SolveError::BadSpec(e.to_string()))
}
