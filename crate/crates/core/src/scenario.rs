//! Scenario files.
//!
//! A scenario is a line-oriented document of `[section]` headers and
//! `key = value` pairs; `#` starts a comment. Sections and keys:
//!
//! ```text
//! [grid]     nx, ny (>= 4, default 64), lx, ly (default 1)
//! [model]    kind = fpd | spd | ks            (default fpd)
//! [params]   d_w, d_p, chi, delta             (default 1)
//!            n (nest), p_dep (deposition), c (food), v (potential)
//! [initial]  u, w (fpd, spd), p, c (spd), rho (ks, required)
//! [run]      t_end (1), dt_max (1e-3), snapshot_every (100), cfl (0.4),
//!            seed (0), output ("out"), blowup_factor (1000)
//! ```
//!
//! Field-valued keys take builders, optionally summed with `+`:
//! `constant(v)`, `gaussian(cx, cy, sigma, amplitude)`,
//! `gaussian_mass(cx, cy, sigma, mass)`, `disk(cx, cy, r, inside, outside)`,
//! `ramp_to_point(cx, cy, slope)` (`v = -slope |x - c|`),
//! `noise(lo, hi)` (uniform, seeded) and `snapshot("path")`.
//! Unknown sections and keys are errors, as are initial keys the chosen
//! model does not use.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{integrate, Field, Grid, GridError};
use crate::io::{read_snapshot, IoError};
use crate::models::{Model, ModelError, ModelKind, ModelParams, RunConfig, SimState};
use crate::stepper::DEFAULT_CFL;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builder {
    Constant(f64),
    Gaussian { cx: f64, cy: f64, sigma: f64, amplitude: f64 },
    GaussianMass { cx: f64, cy: f64, sigma: f64, mass: f64 },
    Disk { cx: f64, cy: f64, radius: f64, inside: f64, outside: f64 },
    RampToPoint { cx: f64, cy: f64, slope: f64 },
    Noise { lo: f64, hi: f64 },
    Snapshot(PathBuf),
    Sum(Vec<Builder>),
}

impl fmt::Display for Builder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builder::Constant(v) => write!(f, "constant({v:?})"),
            Builder::Gaussian { cx, cy, sigma, amplitude } => {
                write!(f, "gaussian({cx:?}, {cy:?}, {sigma:?}, {amplitude:?})")
            }
            Builder::GaussianMass { cx, cy, sigma, mass } => {
                write!(f, "gaussian_mass({cx:?}, {cy:?}, {sigma:?}, {mass:?})")
            }
            Builder::Disk { cx, cy, radius, inside, outside } => {
                write!(f, "disk({cx:?}, {cy:?}, {radius:?}, {inside:?}, {outside:?})")
            }
            Builder::RampToPoint { cx, cy, slope } => write!(f, "ramp_to_point({cx:?}, {cy:?}, {slope:?})"),
            Builder::Noise { lo, hi } => write!(f, "noise({lo:?}, {hi:?})"),
            Builder::Snapshot(p) => write!(f, "snapshot(\"{}\")", p.display()),
            Builder::Sum(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let (mut depth, mut in_str, mut start) = (0i32, false, 0);
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = s.char_indices().collect();
    for (k, &(i, ch)) in bytes.iter().enumerate() {
        match ch {
            '"' => in_str = !in_str,
            '(' if !in_str => depth += 1,
            ')' if !in_str => depth -= 1,
            c if c == sep && depth == 0 && !in_str => {
                // keep exponent signs such as 1e+3 attached
                let prev = if k > 0 { bytes[k - 1].1 } else { ' ' };
                if sep == '+' && (prev == 'e' || prev == 'E') {
                    continue;
                }
                out.push(&s[start..i]);
                start = i + ch.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl Builder {
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts = split_top_level(text, '+');
        if parts.len() > 1 {
            return parts
                .iter()
                .map(|p| Builder::parse(p))
                .collect::<Result<Vec<_>, _>>()
                .map(Builder::Sum);
        }
        let text = text.trim();
        let open = text.find('(').ok_or_else(|| format!("expected a builder call, got {text:?}"))?;
        if !text.ends_with(')') {
            return Err(format!("unclosed builder call {text:?}"));
        }
        let name = text[..open].trim();
        let inner = &text[open + 1..text.len() - 1];
        if name == "snapshot" {
            let path = inner.trim().trim_matches('"');
            if path.is_empty() {
                return Err("snapshot needs a path".into());
            }
            return Ok(Builder::Snapshot(PathBuf::from(path)));
        }
        let args = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad number {:?} in {name}", a.trim())))
                .collect::<Result<Vec<_>, _>>()?
        };
        if let Some(bad) = args.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite argument {bad} in {name}"));
        }
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{name} takes {n} arguments, got {}", args.len()))
            }
        };
        let b = match name {
            "constant" => {
                want(1)?;
                Builder::Constant(args[0])
            }
            "gaussian" => {
                want(4)?;
                Builder::Gaussian { cx: args[0], cy: args[1], sigma: args[2], amplitude: args[3] }
            }
            "gaussian_mass" => {
                want(4)?;
                Builder::GaussianMass { cx: args[0], cy: args[1], sigma: args[2], mass: args[3] }
            }
            "disk" => {
                want(5)?;
                Builder::Disk { cx: args[0], cy: args[1], radius: args[2], inside: args[3], outside: args[4] }
            }
            "ramp_to_point" => {
                want(3)?;
                Builder::RampToPoint { cx: args[0], cy: args[1], slope: args[2] }
            }
            "noise" => {
                want(2)?;
                if args[1] < args[0] {
                    return Err("noise(lo, hi) needs lo <= hi".into());
                }
                Builder::Noise { lo: args[0], hi: args[1] }
            }
            other => return Err(format!("unknown builder {other:?}")),
        };
        if let Builder::Gaussian { sigma, .. } | Builder::GaussianMass { sigma, .. } = b {
            if !(sigma > 0.0) {
                return Err(format!("{name} needs sigma > 0"));
            }
        }
        Ok(b)
    }

    /// Evaluates the builder at cell centres. `seed` drives `noise`;
    /// relative snapshot paths resolve against `base`.
    pub fn build(&self, grid: Grid, seed: u64, base: Option<&Path>) -> Result<Field, ScenarioError> {
        Ok(match self {
            Builder::Constant(v) => Field::constant(grid, *v),
            Builder::Gaussian { cx, cy, sigma, amplitude } => Field::from_fn(grid, |x, y| {
                amplitude * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
            })?,
            Builder::GaussianMass { cx, cy, sigma, mass } => {
                let shape = Field::from_fn(grid, |x, y| {
                    (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
                })?;
                let m = integrate(&shape);
                if !(m > 0.0) {
                    return Err(ScenarioError::Validation(format!("{self} has no mass on the grid")));
                }
                shape.scaled(mass / m)?
            }
            Builder::Disk { cx, cy, radius, inside, outside } => Field::from_fn(grid, |x, y| {
                if (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius {
                    *inside
                } else {
                    *outside
                }
            })?,
            Builder::RampToPoint { cx, cy, slope } => {
                Field::from_fn(grid, |x, y| -slope * ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())?
            }
            Builder::Noise { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values = (0..grid.len()).map(|_| rng.gen_range(*lo..=*hi)).collect();
                Field::new(grid, values)?
            }
            Builder::Snapshot(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                read_snapshot(&path)?.into_field(grid)?
            }
            Builder::Sum(parts) => {
                let mut acc = Field::zeros(grid);
                for (k, p) in parts.iter().enumerate() {
                    let f = p.build(grid, seed.wrapping_add(k as u64 * 0x9e37_79b9), base)?;
                    acc = acc.zip_map(&f, |a, b| a + b)?;
                }
                acc
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridSpec,
    pub kind: ModelKind,
    pub d_w: f64,
    pub d_p: f64,
    pub chi: f64,
    pub delta: f64,
    pub nest: Builder,
    pub deposit: Builder,
    pub food: Builder,
    pub potential: Builder,
    pub u0: Option<Builder>,
    pub w0: Option<Builder>,
    pub p0: Option<Builder>,
    pub c0: Option<Builder>,
    pub rho0: Option<Builder>,
    pub t_end: f64,
    pub dt_max: f64,
    pub snapshot_every: usize,
    pub cfl: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub blowup_factor: f64,
    /// Directory that relative snapshot paths resolve against.
    pub base_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            grid: GridSpec { nx: 64, ny: 64, lx: 1.0, ly: 1.0 },
            kind: ModelKind::Fpd,
            d_w: 1.0,
            d_p: 1.0,
            chi: 1.0,
            delta: 1.0,
            nest: Builder::Constant(0.0),
            deposit: Builder::Constant(1.0),
            food: Builder::Constant(0.0),
            potential: Builder::Constant(0.0),
            u0: None,
            w0: None,
            p0: None,
            c0: None,
            rho0: None,
            t_end: 1.0,
            dt_max: 1e-3,
            snapshot_every: 100,
            cfl: DEFAULT_CFL,
            seed: 0,
            output: PathBuf::from("out"),
            blowup_factor: crate::models::DEFAULT_BLOWUP_FACTOR,
            base_dir: None,
        }
    }
}

/// A ready-to-run scenario.
#[derive(Debug)]
pub struct Setup {
    pub model: Model,
    pub initial: SimState,
    pub run: RunConfig,
    pub warnings: Vec<String>,
}

// per-field seed offsets so noisy fields differ
const SALT_U: u64 = 1;
const SALT_W: u64 = 2;
const SALT_P: u64 = 3;
const SALT_C: u64 = 4;
const SALT_RHO: u64 = 5;
const SALT_PARAM: u64 = 16;

impl Scenario {
    pub fn grid(&self) -> Result<Grid, GridError> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    fn field(&self, b: &Builder, salt: u64) -> Result<Field, ScenarioError> {
        b.build(self.grid()?, self.seed.wrapping_mul(0x1000_0000_01b3).wrapping_add(salt), self.base_dir.as_deref())
    }

    pub fn model_params(&self) -> Result<ModelParams, ScenarioError> {
        let g = self.grid()?;
        let mut p = ModelParams::new(self.kind, g);
        p.d_w = self.d_w;
        p.d_p = self.d_p;
        p.chi = self.chi;
        p.delta = self.delta;
        p.nest = self.field(&self.nest, SALT_PARAM)?;
        p.deposit = self.field(&self.deposit, SALT_PARAM + 1)?;
        p.food = self.field(&self.food, SALT_PARAM + 2)?;
        p.potential = self.field(&self.potential, SALT_PARAM + 3)?;
        p.cfl = self.cfl;
        p.blowup_factor = self.blowup_factor;
        Ok(p)
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig::new(self.t_end, self.dt_max, self.snapshot_every)
    }

    /// Builds every field, checks the sign hypotheses and returns the model
    /// with its initial state.
    pub fn setup(&self) -> Result<Setup, ScenarioError> {
        let g = self.grid()?;
        let params = self.model_params()?;
        for (name, f) in [("n", &params.nest), ("p_dep", &params.deposit), ("c", &params.food)] {
            if f.min() < 0.0 {
                return Err(ScenarioError::Validation(format!(
                    "{name} must be nonnegative (min {:e}), hypothesis (H)",
                    f.min()
                )));
            }
        }
        let model = Model::new(params)?;
        let zero = Builder::Constant(0.0);
        let initial = match self.kind {
            ModelKind::Ks => {
                let b = self
                    .rho0
                    .as_ref()
                    .ok_or_else(|| ScenarioError::Validation("ks scenarios need initial rho".into()))?;
                let rho = self.field(b, SALT_RHO)?;
                check_initial("rho", &rho)?;
                model.initial_ks_state(rho)?
            }
            kind => {
                let u = self.field(self.u0.as_ref().unwrap_or(&zero), SALT_U)?;
                let w = self.field(self.w0.as_ref().unwrap_or(&zero), SALT_W)?;
                check_initial("u", &u)?;
                check_initial("w", &w)?;
                let (p, c) = if kind == ModelKind::Spd {
                    let p = self.field(self.p0.as_ref().unwrap_or(&zero), SALT_P)?;
                    let c = match &self.c0 {
                        Some(b) => self.field(b, SALT_C)?,
                        None => model.params().food.clone(),
                    };
                    check_initial("p", &p)?;
                    check_initial("c", &c)?;
                    (Some(p), Some(c))
                } else {
                    (None, None)
                };
                model.initial_state(u, w, p, c)?
            }
        };
        let _ = g;
        let warnings = model.warnings().to_vec();
        Ok(Setup {
            run: self.run_config(),
            model,
            initial,
            warnings,
        })
    }

    /// FPD run with the same parameters, `u0 = rho0` and `w0 = 0`.
    pub fn fpd_counterpart(&self) -> Result<Scenario, ScenarioError> {
        let rho = self
            .rho0
            .clone()
            .ok_or_else(|| ScenarioError::Validation("scenario has no rho to transfer".into()))?;
        Ok(Scenario {
            kind: ModelKind::Fpd,
            u0: Some(rho),
            w0: Some(Builder::Constant(0.0)),
            rho0: None,
            ..self.clone()
        })
    }

    /// Copy with relative snapshot paths joined onto `base_dir`, so the
    /// text form can be stored elsewhere.
    pub fn with_resolved_paths(&self) -> Scenario {
        fn fix(b: &mut Builder, base: &Path) {
            match b {
                Builder::Snapshot(p) if p.is_relative() => *p = base.join(&*p),
                Builder::Sum(parts) => parts.iter_mut().for_each(|b| fix(b, base)),
                _ => {}
            }
        }
        let mut out = self.clone();
        if let Some(base) = self.base_dir.clone() {
            for b in [&mut out.nest, &mut out.deposit, &mut out.food, &mut out.potential] {
                fix(b, &base);
            }
            for b in [&mut out.u0, &mut out.w0, &mut out.p0, &mut out.c0, &mut out.rho0].into_iter().flatten() {
                fix(b, &base);
            }
        }
        out
    }

    /// Canonical text form with every key spelled out.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        s += &format!("[grid]\nnx = {}\nny = {}\nlx = {:?}\nly = {:?}\n\n", g.nx, g.ny, g.lx, g.ly);
        s += &format!("[model]\nkind = {}\n\n", self.kind);
        s += &format!(
            "[params]\nd_w = {:?}\nd_p = {:?}\nchi = {:?}\ndelta = {:?}\nn = {}\np_dep = {}\nc = {}\nv = {}\n\n",
            self.d_w, self.d_p, self.chi, self.delta, self.nest, self.deposit, self.food, self.potential
        );
        s += "[initial]\n";
        for (k, b) in [
            ("u", &self.u0),
            ("w", &self.w0),
            ("p", &self.p0),
            ("c", &self.c0),
            ("rho", &self.rho0),
        ] {
            if let Some(b) = b {
                s += &format!("{k} = {b}\n");
            }
        }
        s += &format!(
            "\n[run]\nt_end = {:?}\ndt_max = {:?}\nsnapshot_every = {}\ncfl = {:?}\nseed = {}\noutput = \"{}\"\nblowup_factor = {:?}\n",
            self.t_end,
            self.dt_max,
            self.snapshot_every,
            self.cfl,
            self.seed,
            self.output.display(),
            self.blowup_factor
        );
        s
    }
}

fn check_initial(name: &str, f: &Field) -> Result<(), ScenarioError> {
    if f.min() < 0.0 {
        return Err(ScenarioError::Validation(format!(
            "initial {name} must be nonnegative (min {:e})",
            f.min()
        )));
    }
    Ok(())
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("grid", &["nx", "ny", "lx", "ly"]),
    ("model", &["kind"]),
    ("params", &["d_w", "d_p", "chi", "delta", "n", "p_dep", "c", "v"]),
    ("initial", &["u", "w", "p", "c", "rho"]),
    ("run", &["t_end", "dt_max", "snapshot_every", "cfl", "seed", "output", "blowup_factor"]),
];

fn allowed_initial(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Fpd => &["u", "w"],
        ModelKind::Spd => &["u", "w", "p", "c"],
        ModelKind::Ks => &["rho"],
    }
}

/// Parses and validates a scenario; relative snapshot paths are resolved
/// against `base_dir`.
pub fn parse_scenario_in(text: &str, base_dir: Option<&Path>) -> Result<(Scenario, Vec<String>), ScenarioError> {
    let mut entries: BTreeMap<(String, String), (usize, String)> = BTreeMap::new();
    let mut section: Option<&str> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let perr = |message: String| ScenarioError::Parse { line: line_no, message };
        let line = match raw.find('#') {
            // a '#' inside a quoted value is kept
            Some(i) if raw[..i].matches('"').count() % 2 == 0 => &raw[..i],
            _ => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(format!("malformed section header {line:?}")))?
                .trim();
            section = Some(
                SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .map(|(s, _)| *s)
                    .ok_or_else(|| perr(format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let sec = section.ok_or_else(|| perr("key outside of any section".into()))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).unwrap().1;
        if !keys.contains(&key) {
            return Err(perr(format!("unknown key {key:?} in [{sec}]")));
        }
        if value.is_empty() {
            return Err(perr(format!("{key} has no value")));
        }
        if entries
            .insert((sec.to_string(), key.to_string()), (line_no, value.to_string()))
            .is_some()
        {
            return Err(perr(format!("duplicate key {key:?} in [{sec}]")));
        }
    }

    let mut sc = Scenario {
        base_dir: base_dir.map(Path::to_path_buf),
        ..Scenario::default()
    };
    let get = |sec: &str, key: &str| entries.get(&(sec.to_string(), key.to_string()));
    fn num<T: std::str::FromStr>(v: &(usize, String), key: &str) -> Result<T, ScenarioError> {
        v.1.parse::<T>().map_err(|_| ScenarioError::Parse {
            line: v.0,
            message: format!("bad value {:?} for {key}", v.1),
        })
    }
    let builder = |v: &(usize, String)| {
        Builder::parse(&v.1).map_err(|message| ScenarioError::Parse { line: v.0, message })
    };
    let positive = |v: f64, key: &str, line: usize| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(ScenarioError::Parse {
                line,
                message: format!("{key} must be positive and finite, got {v}"),
            })
        }
    };

    if let Some(v) = get("grid", "nx") {
        sc.grid.nx = num(v, "nx")?;
    }
    if let Some(v) = get("grid", "ny") {
        sc.grid.ny = num(v, "ny")?;
    }
    if let Some(v) = get("grid", "lx") {
        sc.grid.lx = positive(num(v, "lx")?, "lx", v.0)?;
    }
    if let Some(v) = get("grid", "ly") {
        sc.grid.ly = positive(num(v, "ly")?, "ly", v.0)?;
    }
    sc.grid()?;
    if let Some(v) = get("model", "kind") {
        sc.kind = v.1.parse().map_err(|message| ScenarioError::Parse { line: v.0, message })?;
    }
    for (key, slot) in [
        ("d_w", &mut sc.d_w),
        ("d_p", &mut sc.d_p),
        ("chi", &mut sc.chi),
        ("delta", &mut sc.delta),
    ] {
        if let Some(v) = get("params", key) {
            *slot = num(v, key)?;
        }
    }
    for (key, slot) in [
        ("n", &mut sc.nest),
        ("p_dep", &mut sc.deposit),
        ("c", &mut sc.food),
        ("v", &mut sc.potential),
    ] {
        if let Some(v) = get("params", key) {
            *slot = builder(v)?;
        }
    }
    let allowed = allowed_initial(sc.kind);
    for ((sec, key), (line, _)) in &entries {
        if sec == "initial" && !allowed.contains(&key.as_str()) {
            return Err(ScenarioError::Parse {
                line: *line,
                message: format!("initial {key} is not used by the {} model", sc.kind),
            });
        }
    }
    for (key, slot) in [
        ("u", &mut sc.u0),
        ("w", &mut sc.w0),
        ("p", &mut sc.p0),
        ("c", &mut sc.c0),
        ("rho", &mut sc.rho0),
    ] {
        if let Some(v) = get("initial", key) {
            *slot = Some(builder(v)?);
        }
    }
    if let Some(v) = get("run", "t_end") {
        sc.t_end = positive(num(v, "t_end")?, "t_end", v.0)?;
    }
    if let Some(v) = get("run", "dt_max") {
        sc.dt_max = positive(num(v, "dt_max")?, "dt_max", v.0)?;
    }
    if let Some(v) = get("run", "snapshot_every") {
        sc.snapshot_every = num(v, "snapshot_every")?;
        if sc.snapshot_every == 0 {
            return Err(ScenarioError::Parse { line: v.0, message: "snapshot_every must be at least 1".into() });
        }
    }
    if let Some(v) = get("run", "cfl") {
        sc.cfl = num(v, "cfl")?;
    }
    if let Some(v) = get("run", "seed") {
        sc.seed = num(v, "seed")?;
    }
    if let Some(v) = get("run", "output") {
        sc.output = PathBuf::from(v.1.trim_matches('"'));
    }
    if let Some(v) = get("run", "blowup_factor") {
        sc.blowup_factor = num(v, "blowup_factor")?;
    }
    if sc.kind == ModelKind::Ks && sc.rho0.is_none() {
        return Err(ScenarioError::Validation("ks scenarios need an initial rho".into()));
    }
    let warnings = sc.setup()?.warnings;
    Ok((sc, warnings))
}

pub fn parse_scenario(text: &str) -> Result<(Scenario, Vec<String>), ScenarioError> {
    parse_scenario_in(text, None)
}

pub fn load_scenario(path: &Path) -> Result<(Scenario, Vec<String>), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_in(&text, path.parent())
}
