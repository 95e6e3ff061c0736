//! On-disk layout of a finished run:
//!
//! ```text
//! <dir>/scenario.cfg            canonical scenario text
//! <dir>/series.csv              per-step diagnostics
//! <dir>/outcome.txt             completed | blowup <t> <max> | failed <t> <message>
//! <dir>/snapshots/NNNNNN_<field>.antf
//! ```
//!
//! A `paired/` subdirectory holding a second run marks the pair for the
//! stability check in `verify-estimates`.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{Field, GridError};
use crate::io::{read_snapshot, read_timeseries, write_snapshot, write_timeseries, IoError};
use crate::models::{FieldName, ForagingState, KsState, ModelKind, Outcome, SimState, Trajectory};
use crate::scenario::{parse_scenario_in, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Layout { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

fn state_fields(kind: ModelKind) -> &'static [FieldName] {
    match kind {
        ModelKind::Ks => &[FieldName::Rho, FieldName::Phi],
        _ => &[FieldName::U, FieldName::W, FieldName::P, FieldName::C],
    }
}

fn snapshot_path(dir: &Path, index: usize, name: FieldName) -> PathBuf {
    dir.join("snapshots").join(format!("{index:06}_{name}.antf"))
}

pub fn outcome_line(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Completed => "completed".into(),
        Outcome::BlowUp { t, max } => format!("blowup {t:?} {max:?}"),
        Outcome::Failed { t, error } => format!("failed {t:?} {}", error.replace('\n', " ")),
    }
}

fn parse_outcome(line: &str, path: &Path) -> Result<Outcome, ArchiveError> {
    let bad = || ArchiveError::Layout {
        path: path.to_path_buf(),
        message: format!("unrecognised outcome {line:?}"),
    };
    let mut parts = line.trim().splitn(3, ' ');
    match parts.next() {
        Some("completed") => Ok(Outcome::Completed),
        Some("blowup") => {
            let t = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let max = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            Ok(Outcome::BlowUp { t, max })
        }
        Some("failed") => {
            let t = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            Ok(Outcome::Failed {
                t,
                error: parts.next().unwrap_or("").to_string(),
            })
        }
        _ => Err(bad()),
    }
}

/// Writes `traj` under `dir`, replacing any earlier snapshots there.
pub fn write_run(dir: &Path, scenario: &Scenario, traj: &Trajectory) -> Result<(), ArchiveError> {
    let snaps = dir.join("snapshots");
    if snaps.exists() {
        fs::remove_dir_all(&snaps).map_err(fs_err(&snaps))?;
    }
    fs::create_dir_all(&snaps).map_err(fs_err(&snaps))?;
    let cfg = dir.join("scenario.cfg");
    fs::write(&cfg, scenario.with_resolved_paths().to_config_string()).map_err(fs_err(&cfg))?;
    write_timeseries(&traj.series, &dir.join("series.csv"))?;
    let out = dir.join("outcome.txt");
    fs::write(&out, outcome_line(&traj.outcome) + "\n").map_err(fs_err(&out))?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        for &name in state_fields(traj.kind) {
            let f = s.field(name).expect("state carries every field of its kind");
            write_snapshot(f, s.t(), &snapshot_path(dir, k, name))?;
        }
    }
    Ok(())
}

/// Reads a run directory back. Snapshot paths in the stored scenario
/// resolve against `dir`.
pub fn load_run(dir: &Path) -> Result<(Scenario, Trajectory), ArchiveError> {
    let cfg = dir.join("scenario.cfg");
    let text = fs::read_to_string(&cfg).map_err(fs_err(&cfg))?;
    let (scenario, _) = parse_scenario_in(&text, Some(dir))?;
    let grid = scenario.grid()?;
    let series = read_timeseries(&dir.join("series.csv"))?;
    let out = dir.join("outcome.txt");
    let outcome = parse_outcome(&fs::read_to_string(&out).map_err(fs_err(&out))?, &out)?;

    let mut snapshots = Vec::new();
    let mut initial_max = None;
    for k in 0.. {
        let names = state_fields(scenario.kind);
        if !snapshot_path(dir, k, names[0]).exists() {
            break;
        }
        let mut t = 0.0;
        let mut fields: Vec<Field> = Vec::with_capacity(names.len());
        for &name in names {
            let s = read_snapshot(&snapshot_path(dir, k, name))?;
            t = s.t;
            fields.push(s.into_field(grid)?);
        }
        let mut it = fields.into_iter();
        let mut next = || it.next().expect("one field per name");
        snapshots.push(match scenario.kind {
            ModelKind::Ks => {
                let (rho, phi) = (next(), next());
                let init = *initial_max.get_or_insert(rho.max());
                SimState::KellerSegel(KsState {
                    t,
                    rho,
                    phi,
                    initial_max: init,
                    blowup: false,
                })
            }
            _ => SimState::Foraging(ForagingState {
                t,
                u: next(),
                w: next(),
                p: next(),
                c: next(),
            }),
        });
    }
    if snapshots.is_empty() {
        return Err(ArchiveError::Layout {
            path: dir.join("snapshots"),
            message: "no snapshots found".into(),
        });
    }
    if let (Outcome::BlowUp { .. }, Some(SimState::KellerSegel(s))) = (&outcome, snapshots.last_mut()) {
        s.blowup = true;
    }
    let m0 = snapshots[0].mass();
    let traj = Trajectory {
        kind: scenario.kind,
        grid,
        snapshots,
        series,
        outcome,
        m0,
    };
    Ok((scenario, traj))
}
