//! One IMEX step of `f_t - D Lap f + div(f vel) = -r f + s`: implicit
//! diffusion, explicit upwind transport and explicit reaction.

use thiserror::Error;

use crate::elliptic::DEFAULT_REL_TOL;
use crate::grid::{upwind_div, FaceVelocity, Field, GridError, NEGATIVITY_TOL};
use crate::spectral::{NeumannSolver, Preconditioner, SolveError};

pub const DEFAULT_CFL: f64 = 0.4;
/// Velocity magnitude below which the transport limit is considered absent.
pub const VELOCITY_FLOOR: f64 = 1e-12;
const IMPLICIT_MAX_ITER: usize = 200;
// relative slack when comparing a requested dt with the admissible one
const DT_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("time step {dt:e} exceeds the admissible {admissible:e}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("invalid step setting: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("implicit solve failed: {0}")]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy)]
pub struct StepSpec<'a> {
    pub diffusivity: f64,
    pub dt: f64,
    pub cfl: f64,
    /// Linear sink rate `r >= 0`.
    pub sink: Option<&'a Field>,
    /// Source density rate `s >= 0`.
    pub source: Option<&'a Field>,
    /// Signed explicit rate added after sink and source. Its sign is not
    /// checked, so the caller owns positivity of this part.
    pub forcing: Option<&'a Field>,
}

impl<'a> StepSpec<'a> {
    pub fn diffusion(diffusivity: f64, dt: f64) -> Self {
        Self {
            diffusivity,
            dt,
            cfl: DEFAULT_CFL,
            sink: None,
            source: None,
            forcing: None,
        }
    }
}

fn check_cfl(cfl: f64) -> Result<(), StepError> {
    if cfl > 0.0 && cfl < 1.0 {
        Ok(())
    } else {
        Err(StepError::BadSpec(format!("cfl must lie in (0, 1), got {cfl}")))
    }
}

/// `cfl * min(dx, dy) / max|vel|`, capped at `dt_max`.
pub fn cfl_dt(vel: &FaceVelocity, cfl: f64, dt_max: f64) -> Result<f64, StepError> {
    check_cfl(cfl)?;
    if !(dt_max > 0.0 && dt_max.is_finite()) {
        return Err(StepError::BadSpec(format!("dt_max must be positive and finite, got {dt_max}")));
    }
    let g = vel.grid();
    let h = g.dx().min(g.dy());
    Ok((cfl * h / vel.max_abs().max(VELOCITY_FLOOR)).min(dt_max))
}

/// Largest dt keeping the explicit part of the update nonnegative:
/// `dt * (outflow rate + r) <= 1` in every cell.
pub fn positivity_dt(vel: &FaceVelocity, sink: Option<&Field>) -> f64 {
    let out = vel.outflow_rates();
    let worst = match sink {
        Some(r) => out
            .iter()
            .zip(r.values())
            .map(|(o, r)| o + r.max(0.0))
            .fold(0.0, f64::max),
        None => out.iter().copied().fold(0.0, f64::max),
    };
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Largest dt accepted by [`imex_step`]: the transport CFL limit combined with
/// the local positivity limit.
pub fn admissible_dt(vel: &FaceVelocity, sink: Option<&Field>, cfl: f64) -> Result<f64, StepError> {
    check_cfl(cfl)?;
    let g = vel.grid();
    let vmax = vel.max_abs();
    let transport = if vmax > VELOCITY_FLOOR {
        cfl * g.dx().min(g.dy()) / vmax
    } else {
        f64::INFINITY
    };
    Ok(transport.min(positivity_dt(vel, sink)))
}

pub fn imex_step(f: &Field, vel: &FaceVelocity, spec: &StepSpec<'_>) -> Result<Field, StepError> {
    imex_step_with(&NeumannSolver::new(*f.grid()), f, vel, spec)
}

/// Solves `(I - dt D Lap_h) f_new = f - dt div_up(f vel) - dt r f + dt s`.
pub fn imex_step_with(
    solver: &NeumannSolver,
    f: &Field,
    vel: &FaceVelocity,
    spec: &StepSpec<'_>,
) -> Result<Field, StepError> {
    let g = *f.grid();
    if solver.grid() != &g || vel.grid() != &g {
        return Err(GridError::GridMismatch.into());
    }
    if !(spec.diffusivity > 0.0 && spec.diffusivity.is_finite()) {
        return Err(StepError::BadSpec(format!(
            "diffusivity must be positive, got {}",
            spec.diffusivity
        )));
    }
    if !(spec.dt > 0.0 && spec.dt.is_finite()) {
        return Err(StepError::BadSpec(format!("dt must be positive, got {}", spec.dt)));
    }
    for (name, field) in [("sink", spec.sink), ("source", spec.source)] {
        if let Some(field) = field {
            if field.grid() != &g {
                return Err(GridError::GridMismatch.into());
            }
            let floor = -NEGATIVITY_TOL * field.max_abs().max(1.0);
            if field.min() < floor {
                return Err(StepError::BadSpec(format!(
                    "{name} must be nonnegative, min is {:e}",
                    field.min()
                )));
            }
        }
    }
    if let Some(fz) = spec.forcing {
        if fz.grid() != &g {
            return Err(GridError::GridMismatch.into());
        }
    }
    let admissible = admissible_dt(vel, spec.sink, spec.cfl)?;
    if spec.dt > admissible * (1.0 + DT_SLACK) {
        return Err(StepError::Cfl {
            dt: spec.dt,
            admissible,
        });
    }

    let dt = spec.dt;
    // without transport there is no sign requirement on f
    let mut rhs = f.values().to_vec();
    if vel.max_abs() > 0.0 {
        let div = upwind_div(f, vel)?;
        rhs.iter_mut().zip(div.values()).for_each(|(e, dv)| *e -= dt * dv);
    }
    if let Some(r) = spec.sink {
        rhs.iter_mut()
            .zip(r.values().iter().zip(f.values()))
            .for_each(|(e, (rv, fv))| *e -= dt * (rv * fv));
    }
    if let Some(s) = spec.source {
        rhs.iter_mut().zip(s.values()).for_each(|(e, sv)| *e += dt * sv);
    }
    if let Some(fz) = spec.forcing {
        rhs.iter_mut().zip(fz.values()).for_each(|(e, fv)| *e += dt * fv);
    }
    let (next, _) = solver.solve(
        &rhs,
        1.0,
        dt * spec.diffusivity,
        DEFAULT_REL_TOL,
        IMPLICIT_MAX_ITER,
        Preconditioner::Cosine,
    )?;
    Ok(Field::new(g, next)?)
}
