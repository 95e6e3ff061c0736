//! Coupled systems: fast-pheromone (FPD), slow-pheromone (SPD) with food
//! depletion, and the parabolic–elliptic Keller–Segel reference (KS).
//!
//! All three share the same step layout: evaluate drifts and the exchange
//! term `c u - N w` from the start-of-step state, then advance each density
//! with one IMEX step. The exchange is applied as `-E` to `u` and `+E` to
//! `w` from a single array, so it cancels exactly in the total mass.

use std::fmt;
use std::str::FromStr;

use log::debug;
use thiserror::Error;

use crate::elliptic::{solve_with, EllipticSpec};
use crate::grid::{gradient_faces, integrate, lp_norm, FaceVelocity, Field, Grid, GridError};
use crate::io::{IoError, TimeSeries};
use crate::spectral::{NeumannSolver, SolveError};
use crate::stepper::{admissible_dt, imex_step_with, StepError, StepSpec, DEFAULT_CFL};

/// Default ratio of `max rho` to its initial value that flags KS growth.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e3;
// relative slack for the boundary-orientation advisory
const ORIENTATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("hypothesis (H) violated: {0}")]
    Hypothesis(String),
    #[error("invalid model setting: {0}")]
    BadSpec(String),
    #[error("state does not match model kind {0}")]
    WrongKind(ModelKind),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("elliptic solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("admissible time step {dt:e} collapsed at t = {t}")]
    StepTooSmall { t: f64, dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Fpd,
    Spd,
    Ks,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Fpd => "fpd",
            ModelKind::Spd => "spd",
            ModelKind::Ks => "ks",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fpd" => Ok(ModelKind::Fpd),
            "spd" => Ok(ModelKind::Spd),
            "ks" => Ok(ModelKind::Ks),
            other => Err(format!("unknown model kind {other:?} (expected fpd, spd or ks)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldName {
    U,
    W,
    P,
    C,
    Rho,
    Phi,
}

impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldName::U => "u",
            FieldName::W => "w",
            FieldName::P => "p",
            FieldName::C => "c",
            FieldName::Rho => "rho",
            FieldName::Phi => "phi",
        })
    }
}

impl FromStr for FieldName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "u" => Ok(FieldName::U),
            "w" => Ok(FieldName::W),
            "p" => Ok(FieldName::P),
            "c" => Ok(FieldName::C),
            "rho" => Ok(FieldName::Rho),
            "phi" => Ok(FieldName::Phi),
            other => Err(format!("unknown field {other:?}")),
        }
    }
}

/// Coefficients and data fields. `food` is the static food of FPD; SPD
/// carries its food in the state.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub d_w: f64,
    pub d_p: f64,
    pub chi: f64,
    pub delta: f64,
    /// Nest rate `N`.
    pub nest: Field,
    /// Pheromone deposition `P`.
    pub deposit: Field,
    pub food: Field,
    /// Potential `v`; returning ants drift along `grad v`.
    pub potential: Field,
    pub cfl: f64,
    pub blowup_factor: f64,
}

impl ModelParams {
    /// Unit coefficients, `delta = 1`, `P = 1`, and zero nest, food and
    /// potential.
    pub fn new(kind: ModelKind, grid: Grid) -> Self {
        Self {
            kind,
            d_w: 1.0,
            d_p: 1.0,
            chi: 1.0,
            delta: 1.0,
            nest: Field::zeros(grid),
            deposit: Field::constant(grid, 1.0),
            food: Field::zeros(grid),
            potential: Field::zeros(grid),
            cfl: DEFAULT_CFL,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.nest.grid()
    }

    /// Checks the sign hypotheses and returns advisory warnings (currently
    /// only an outward-pointing `grad v` on the boundary).
    pub fn validate(&self) -> Result<Vec<String>, ModelError> {
        let g = *self.grid();
        for (name, f) in [
            ("N", &self.nest),
            ("P", &self.deposit),
            ("c", &self.food),
            ("v", &self.potential),
        ] {
            if f.grid() != &g {
                return Err(ModelError::BadSpec(format!("{name} lives on a different grid")));
            }
        }
        for (name, f) in [("N", &self.nest), ("P", &self.deposit), ("c", &self.food)] {
            if f.min() < 0.0 {
                return Err(ModelError::Hypothesis(format!(
                    "{name} must be nonnegative, min is {:e}",
                    f.min()
                )));
            }
        }
        for (name, v) in [("D_w", self.d_w), ("D_p", self.d_p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::Hypothesis(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("chi", self.chi), ("delta", self.delta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::Hypothesis(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(ModelError::BadSpec(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(ModelError::BadSpec(format!(
                "blowup_factor must exceed 1, got {}",
                self.blowup_factor
            )));
        }
        let mut warnings = Vec::new();
        if let Some(msg) = outward_potential_gradient(&self.potential) {
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

/// One-sided `grad v . n` on every wall cell; reports the worst positive
/// value, which means returning ants are pushed into the wall.
fn outward_potential_gradient(v: &Field) -> Option<String> {
    let g = v.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let scale = v.max_abs().max(1.0) / g.dx().min(g.dy());
    let mut worst: Option<(f64, usize, usize)> = None;
    let mut note = |val: f64, i: usize, j: usize| {
        if val > ORIENTATION_TOL * scale && worst.is_none_or(|(w, _, _)| val > w) {
            worst = Some((val, i, j));
        }
    };
    for j in 0..ny {
        note(-(v.at(1, j) - v.at(0, j)) / g.dx(), 0, j);
        note((v.at(nx - 1, j) - v.at(nx - 2, j)) / g.dx(), nx - 1, j);
    }
    for i in 0..nx {
        note(-(v.at(i, 1) - v.at(i, 0)) / g.dy(), i, 0);
        note((v.at(i, ny - 1) - v.at(i, ny - 2)) / g.dy(), i, ny - 1);
    }
    worst.map(|(val, i, j)| {
        format!("grad v . n = {val:.3e} > 0 at boundary cell ({i}, {j}); the nest drift points out of the domain")
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForagingState {
    pub t: f64,
    pub u: Field,
    pub w: Field,
    /// Pheromone; for FPD the potential used by the step that produced
    /// this state.
    pub p: Field,
    pub c: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsState {
    pub t: f64,
    pub rho: Field,
    pub phi: Field,
    pub initial_max: f64,
    pub blowup: bool,
}

impl KsState {
    pub fn new(rho: Field) -> Self {
        let g = *rho.grid();
        Self {
            t: 0.0,
            initial_max: rho.max(),
            rho,
            phi: Field::zeros(g),
            blowup: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimState {
    Foraging(ForagingState),
    KellerSegel(KsState),
}

impl SimState {
    pub fn t(&self) -> f64 {
        match self {
            SimState::Foraging(s) => s.t,
            SimState::KellerSegel(s) => s.t,
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            SimState::Foraging(s) => s.u.grid(),
            SimState::KellerSegel(s) => s.rho.grid(),
        }
    }

    pub fn field(&self, name: FieldName) -> Option<&Field> {
        match (self, name) {
            (SimState::Foraging(s), FieldName::U) => Some(&s.u),
            (SimState::Foraging(s), FieldName::W) => Some(&s.w),
            (SimState::Foraging(s), FieldName::P) => Some(&s.p),
            (SimState::Foraging(s), FieldName::C) => Some(&s.c),
            (SimState::KellerSegel(s), FieldName::Rho) => Some(&s.rho),
            (SimState::KellerSegel(s), FieldName::Phi) => Some(&s.phi),
            _ => None,
        }
    }

    /// Conserved mass: `int(u + w)` or `int(rho)`.
    pub fn mass(&self) -> f64 {
        match self {
            SimState::Foraging(s) => integrate(&s.u) + integrate(&s.w),
            SimState::KellerSegel(s) => integrate(&s.rho),
        }
    }
}

enum Dt {
    Exact(f64),
    UpTo(f64),
}

/// Parameters plus cached solver state for one grid.
#[derive(Debug)]
pub struct Model {
    params: ModelParams,
    solver: NeumannSolver,
    drift_w: FaceVelocity,
    warnings: Vec<String>,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self, ModelError> {
        let warnings = params.validate()?;
        for w in &warnings {
            debug!("{w}");
        }
        let g = *params.grid();
        Ok(Self {
            drift_w: gradient_faces(&params.potential),
            solver: NeumannSolver::new(g),
            params,
            warnings,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind
    }

    /// Initial state with the derived fields (`p` for FPD, `phi` for KS)
    /// filled in. `p0` and `c0` are only used by SPD.
    pub fn initial_state(&self, u0: Field, w0: Field, p0: Option<Field>, c0: Option<Field>) -> Result<SimState, ModelError> {
        let g = *self.params.grid();
        for f in [&u0, &w0] {
            if f.grid() != &g {
                return Err(GridError::GridMismatch.into());
            }
            if f.min() < 0.0 {
                return Err(ModelError::Hypothesis(format!(
                    "initial populations must be nonnegative, min is {:e}",
                    f.min()
                )));
            }
        }
        match self.params.kind {
            ModelKind::Fpd => {
                let p = solve_with(&self.solver, &w0, &EllipticSpec::new(self.params.delta))?;
                Ok(SimState::Foraging(ForagingState {
                    t: 0.0,
                    u: u0,
                    w: w0,
                    p,
                    c: self.params.food.clone(),
                }))
            }
            ModelKind::Spd => {
                let p = p0.unwrap_or_else(|| Field::zeros(g));
                let c = c0.unwrap_or_else(|| self.params.food.clone());
                for (name, f) in [("p", &p), ("c", &c)] {
                    if f.grid() != &g {
                        return Err(GridError::GridMismatch.into());
                    }
                    if f.min() < 0.0 {
                        return Err(ModelError::Hypothesis(format!("initial {name} must be nonnegative")));
                    }
                }
                Ok(SimState::Foraging(ForagingState { t: 0.0, u: u0, w: w0, p, c }))
            }
            ModelKind::Ks => Err(ModelError::WrongKind(ModelKind::Ks)),
        }
    }

    pub fn initial_ks_state(&self, rho0: Field) -> Result<SimState, ModelError> {
        if self.params.kind != ModelKind::Ks {
            return Err(ModelError::WrongKind(self.params.kind));
        }
        if rho0.grid() != self.params.grid() {
            return Err(GridError::GridMismatch.into());
        }
        if rho0.min() < 0.0 {
            return Err(ModelError::Hypothesis("initial density must be nonnegative".into()));
        }
        let phi = solve_with(&self.solver, &rho0, &EllipticSpec::new(0.0))?;
        Ok(SimState::KellerSegel(KsState {
            phi,
            ..KsState::new(rho0)
        }))
    }

    fn pick_dt(&self, t: f64, limit: f64, req: Dt) -> Result<f64, ModelError> {
        match req {
            Dt::Exact(dt) => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(ModelError::BadSpec(format!("dt must be positive, got {dt}")));
                }
                if dt > limit * (1.0 + 1e-12) {
                    return Err(StepError::Cfl { dt, admissible: limit }.into());
                }
                Ok(dt)
            }
            Dt::UpTo(cap) => {
                let dt = cap.min(limit);
                if !(dt > 0.0) {
                    return Err(ModelError::StepTooSmall { t, dt });
                }
                Ok(dt)
            }
        }
    }

    /// Advances `u` and `w` with the shared exchange term.
    fn advance_populations(
        &self,
        s: &ForagingState,
        vel_u: &FaceVelocity,
        c: &Field,
        dt: f64,
    ) -> Result<(Field, Field), ModelError> {
        let exchange: Vec<f64> = s
            .u
            .values()
            .iter()
            .zip(c.values())
            .zip(s.w.values().iter().zip(self.params.nest.values()))
            .map(|((u, c), (w, n))| u * c - w * n)
            .collect();
        let to_u = Field::new(*s.u.grid(), exchange.iter().map(|e| -e).collect())?;
        let exchange = Field::new(*s.u.grid(), exchange)?;
        let u = imex_step_with(
            &self.solver,
            &s.u,
            vel_u,
            &StepSpec {
                cfl: self.params.cfl,
                forcing: Some(&to_u),
                ..StepSpec::diffusion(1.0, dt)
            },
        )?;
        let w = imex_step_with(
            &self.solver,
            &s.w,
            &self.drift_w,
            &StepSpec {
                cfl: self.params.cfl,
                forcing: Some(&exchange),
                ..StepSpec::diffusion(self.params.d_w, dt)
            },
        )?;
        Ok((u, w))
    }

    fn population_limit(&self, vel_u: &FaceVelocity, c: &Field) -> Result<f64, ModelError> {
        let a = admissible_dt(vel_u, Some(c), self.params.cfl)?;
        let b = admissible_dt(&self.drift_w, Some(&self.params.nest), self.params.cfl)?;
        Ok(a.min(b))
    }

    fn fpd(&self, s: &ForagingState, req: Dt) -> Result<(ForagingState, f64), ModelError> {
        let p = solve_with(&self.solver, &s.w, &EllipticSpec::new(self.params.delta))?;
        let vel_u = gradient_faces(&p).scaled(self.params.chi);
        let limit = self.population_limit(&vel_u, &self.params.food)?;
        let dt = self.pick_dt(s.t, limit, req)?;
        let (u, w) = self.advance_populations(s, &vel_u, &self.params.food, dt)?;
        Ok((
            ForagingState {
                t: s.t + dt,
                u,
                w,
                p,
                c: self.params.food.clone(),
            },
            dt,
        ))
    }

    fn spd(&self, s: &ForagingState, req: Dt) -> Result<(ForagingState, f64), ModelError> {
        let g = *self.params.grid();
        let vel_u = gradient_faces(&s.p).scaled(self.params.chi);
        let evaporation = Field::constant(g, self.params.delta);
        let limit = self
            .population_limit(&vel_u, &s.c)?
            .min(admissible_dt(&FaceVelocity::zeros(g), Some(&evaporation), self.params.cfl)?);
        let dt = self.pick_dt(s.t, limit, req)?;
        let (u, w) = self.advance_populations(s, &vel_u, &s.c, dt)?;
        let deposit = self.params.deposit.zip_map(&s.w, |a, b| a * b)?;
        let p = imex_step_with(
            &self.solver,
            &s.p,
            &FaceVelocity::zeros(g),
            &StepSpec {
                cfl: self.params.cfl,
                sink: Some(&evaporation),
                source: Some(&deposit),
                ..StepSpec::diffusion(self.params.d_p, dt)
            },
        )?;
        let c = s.c.zip_map(&s.u, |c, u| c * (-u.max(0.0) * dt).exp())?;
        Ok((ForagingState { t: s.t + dt, u, w, p, c }, dt))
    }

    fn ks(&self, s: &KsState, req: Dt) -> Result<(KsState, f64), ModelError> {
        let phi = solve_with(&self.solver, &s.rho, &EllipticSpec::new(0.0))?;
        let vel = gradient_faces(&phi);
        let limit = admissible_dt(&vel, None, self.params.cfl)?;
        let dt = self.pick_dt(s.t, limit, req)?;
        let rho = imex_step_with(
            &self.solver,
            &s.rho,
            &vel,
            &StepSpec {
                cfl: self.params.cfl,
                ..StepSpec::diffusion(1.0, dt)
            },
        )?;
        let blowup = s.blowup || rho.max() > self.params.blowup_factor * s.initial_max;
        Ok((
            KsState {
                t: s.t + dt,
                rho,
                phi,
                initial_max: s.initial_max,
                blowup,
            },
            dt,
        ))
    }

    fn dispatch(&self, state: &SimState, req: Dt) -> Result<(SimState, f64), ModelError> {
        match (self.params.kind, state) {
            (ModelKind::Fpd, SimState::Foraging(s)) => self.fpd(s, req).map(|(s, dt)| (SimState::Foraging(s), dt)),
            (ModelKind::Spd, SimState::Foraging(s)) => self.spd(s, req).map(|(s, dt)| (SimState::Foraging(s), dt)),
            (ModelKind::Ks, SimState::KellerSegel(s)) => {
                self.ks(s, req).map(|(s, dt)| (SimState::KellerSegel(s), dt))
            }
            (kind, _) => Err(ModelError::WrongKind(kind)),
        }
    }

    /// One step of exactly `dt`; rejected with the admissible value if too
    /// large.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState, ModelError> {
        self.dispatch(state, Dt::Exact(dt)).map(|(s, _)| s)
    }

    /// One step of the largest admissible size not exceeding `dt_cap`.
    pub fn step_adaptive(&self, state: &SimState, dt_cap: f64) -> Result<(SimState, f64), ModelError> {
        self.dispatch(state, Dt::UpTo(dt_cap))
    }
}

pub fn fpd_step(state: &SimState, params: &ModelParams, dt: f64) -> Result<SimState, ModelError> {
    expect_kind(params, ModelKind::Fpd)?;
    Model::new(params.clone())?.step(state, dt)
}

pub fn spd_step(state: &SimState, params: &ModelParams, dt: f64) -> Result<SimState, ModelError> {
    expect_kind(params, ModelKind::Spd)?;
    Model::new(params.clone())?.step(state, dt)
}

pub fn ks_step(state: &SimState, params: &ModelParams, dt: f64) -> Result<SimState, ModelError> {
    expect_kind(params, ModelKind::Ks)?;
    Model::new(params.clone())?.step(state, dt)
}

fn expect_kind(params: &ModelParams, kind: ModelKind) -> Result<(), ModelError> {
    if params.kind == kind {
        Ok(())
    } else {
        Err(ModelError::WrongKind(params.kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt_max: f64,
    /// Store a snapshot every this many steps (plus the first and last).
    pub snapshot_every: usize,
    pub max_steps: usize,
}

impl RunConfig {
    pub fn new(t_end: f64, dt_max: f64, snapshot_every: usize) -> Self {
        Self {
            t_end,
            dt_max,
            snapshot_every,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    BlowUp { t: f64, max: f64 },
    Failed { t: f64, error: String },
}

/// Immutable record of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: ModelKind,
    pub grid: Grid,
    pub snapshots: Vec<SimState>,
    /// One row per step (and one for `t = 0`).
    pub series: TimeSeries,
    pub outcome: Outcome,
    pub m0: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(SimState::t).collect()
    }

    pub fn last(&self) -> &SimState {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }
}

fn series_columns(kind: ModelKind) -> Vec<&'static str> {
    match kind {
        ModelKind::Ks => vec!["t", "dt", "mass_rho", "min_rho", "max_rho", "l2_rho"],
        _ => vec![
            "t",
            "dt",
            "mass_u",
            "mass_w",
            "mass_total",
            "min_u",
            "max_u",
            "min_w",
            "max_w",
            "min_c",
            "max_c",
            "max_p",
            "l2_u",
            "l2_w",
        ],
    }
}

fn series_row(state: &SimState, dt: f64) -> Result<Vec<f64>, ModelError> {
    Ok(match state {
        SimState::Foraging(s) => {
            let (mu, mw) = (integrate(&s.u), integrate(&s.w));
            vec![
                s.t,
                dt,
                mu,
                mw,
                mu + mw,
                s.u.min(),
                s.u.max(),
                s.w.min(),
                s.w.max(),
                s.c.min(),
                s.c.max(),
                s.p.max(),
                lp_norm(&s.u, 2.0)?,
                lp_norm(&s.w, 2.0)?,
            ]
        }
        SimState::KellerSegel(s) => vec![
            s.t,
            dt,
            integrate(&s.rho),
            s.rho.min(),
            s.rho.max(),
            lp_norm(&s.rho, 2.0)?,
        ],
    })
}

/// Advances `initial` to `cfg.t_end` with admissible steps. Step failures
/// end the run with [`Outcome::Failed`] and keep everything recorded so far;
/// a KS blow-up flag ends it with [`Outcome::BlowUp`].
pub fn run(model: &Model, initial: SimState, cfg: &RunConfig) -> Result<Trajectory, ModelError> {
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return Err(ModelError::BadSpec(format!("t_end must be positive, got {}", cfg.t_end)));
    }
    if !(cfg.dt_max > 0.0) {
        return Err(ModelError::BadSpec(format!("dt_max must be positive, got {}", cfg.dt_max)));
    }
    if cfg.snapshot_every == 0 {
        return Err(ModelError::BadSpec("snapshot_every must be at least 1".into()));
    }
    let kind = model.kind();
    let grid = *initial.grid();
    let m0 = initial.mass();
    let mut series = TimeSeries::new(series_columns(kind));
    series.push(series_row(&initial, 0.0)?)?;
    let mut snapshots = vec![initial.clone()];
    let mut state = initial;
    let mut steps = 0usize;
    let floor = 1e-14 * cfg.t_end;
    let outcome = loop {
        let t = state.t();
        if t >= cfg.t_end {
            break Outcome::Completed;
        }
        if steps >= cfg.max_steps {
            break Outcome::Failed {
                t,
                error: format!("step budget of {} exhausted", cfg.max_steps),
            };
        }
        let remaining = cfg.t_end - t;
        let cap = cfg.dt_max.min(remaining);
        let (mut next, dt) = match model.step_adaptive(&state, cap) {
            Ok(v) => v,
            Err(e) => break Outcome::Failed { t, error: e.to_string() },
        };
        if dt < floor && dt < remaining {
            break Outcome::Failed {
                t,
                error: ModelError::StepTooSmall { t, dt }.to_string(),
            };
        }
        // land exactly on t_end, absorbing rounding left by repeated sums
        if dt >= remaining || remaining - dt <= 1e-9 * dt {
            match &mut next {
                SimState::Foraging(s) => s.t = cfg.t_end,
                SimState::KellerSegel(s) => s.t = cfg.t_end,
            }
        }
        steps += 1;
        series.push(series_row(&next, dt)?)?;
        let blow = match &next {
            SimState::KellerSegel(s) if s.blowup => Some(s.rho.max()),
            _ => None,
        };
        let done = next.t() >= cfg.t_end || blow.is_some();
        if steps.is_multiple_of(cfg.snapshot_every) || done {
            snapshots.push(next.clone());
        }
        state = next;
        if let Some(max) = blow {
            break Outcome::BlowUp { t: state.t(), max };
        }
    };
    if let Outcome::Failed { t, .. } = &outcome {
        if snapshots.last().map(SimState::t) != Some(*t) {
            snapshots.push(state);
        }
    }
    Ok(Trajectory {
        kind,
        grid,
        snapshots,
        series,
        outcome,
        m0,
    })
}
