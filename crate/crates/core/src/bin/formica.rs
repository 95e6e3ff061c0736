use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use formica::archive::{load_run, write_run};
use formica::io::{write_timeseries, TimeSeries};
use formica::archive::outcome_line;
use formica::models::{run, ModelKind, Outcome, SimState, Trajectory};
use formica::scenario::{load_scenario, Scenario};
use formica::verify::{mass_drift, oracle_check, peak_max_norm, verify_estimates, EstimateTolerances, OracleSpec};

const EXIT_USAGE: u8 = 64;
const OUTPUT_ENV: &str = "FORMICA_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "formica", version, about = "Foraging chemotaxis simulator and estimate checker")]
struct Cli {
    /// Worker threads for field operations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write snapshots and the diagnostics CSV.
    Run { scenario: PathBuf },
    /// Run a KS scenario and an FPD run of equal mass and compare max-norms.
    /// Without a second file the FPD run reuses the KS file's parameters
    /// with u0 = rho0 and w0 = 0.
    KsCompare { ks: PathBuf, fpd: Option<PathBuf> },
    /// Check a stored run against the decay, boundedness and level-set
    /// estimates. A `paired/` subdirectory adds the stability check.
    VerifyEstimates { dir: PathBuf },
    /// Cross-check the implicit stepper against the heat-kernel solution.
    OracleCheck {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
    },
}

type CliResult<T> = Result<T, String>;

fn output_dir(scenario: &Scenario) -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| scenario.output.clone())
}

fn load(path: &Path) -> CliResult<Scenario> {
    let (sc, warnings) = load_scenario(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for w in warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(sc)
}

fn simulate(sc: &Scenario) -> CliResult<Trajectory> {
    let setup = sc.setup().map_err(|e| e.to_string())?;
    run(&setup.model, setup.initial, &setup.run).map_err(|e| e.to_string())
}

fn cmd_run(path: &Path) -> CliResult<u8> {
    let sc = load(path)?;
    let traj = simulate(&sc)?;
    let dir = output_dir(&sc);
    write_run(&dir, &sc, &traj).map_err(|e| e.to_string())?;
    println!("output: {}", dir.display());
    println!("snapshots: {}, steps: {}", traj.snapshots.len(), traj.series.len() - 1);
    println!("mass drift: {:.3e} (relative to m0 = {:.6e})", mass_drift(&traj), traj.m0);
    match &traj.outcome {
        Outcome::Completed => {
            println!("completed t = {}", traj.last().t());
            Ok(0)
        }
        Outcome::BlowUp { t, max } => {
            println!("blow-up flag set at t = {t:.6e} (max = {max:.6e})");
            Ok(2)
        }
        Outcome::Failed { t, error } => Err(format!("run stopped at t = {t:.6e}: {error}")),
    }
}

fn max_norm_series(traj: &Trajectory, label: &str) -> CliResult<TimeSeries> {
    let mut s = TimeSeries::new(["t", label]);
    let cols = match traj.kind {
        ModelKind::Ks => vec!["max_rho"],
        _ => vec!["max_u", "max_w"],
    };
    let t = traj.series.column("t").unwrap_or_default();
    let parts: Vec<Vec<f64>> = cols.iter().map(|c| traj.series.column(c).unwrap_or_default()).collect();
    for (i, ti) in t.iter().enumerate() {
        s.push(vec![*ti, parts.iter().map(|p| p[i]).sum()]).map_err(|e| e.to_string())?;
    }
    Ok(s)
}

fn cmd_ks_compare(ks_path: &Path, fpd_path: Option<&Path>) -> CliResult<u8> {
    let ks = load(ks_path)?;
    if ks.kind != ModelKind::Ks {
        return Err(format!("{}: expected a ks scenario, found {}", ks_path.display(), ks.kind));
    }
    let fpd = match fpd_path {
        Some(p) => load(p)?,
        None => ks.fpd_counterpart().map_err(|e| e.to_string())?,
    };
    if fpd.kind != ModelKind::Fpd {
        return Err(format!("the comparison run must be fpd, found {}", fpd.kind));
    }
    let ks_traj = simulate(&ks)?;
    let fpd_traj = simulate(&fpd)?;
    let rel = (ks_traj.m0 - fpd_traj.m0).abs() / ks_traj.m0.abs().max(f64::MIN_POSITIVE);
    if rel > 1e-6 {
        return Err(format!(
            "masses differ: ks {:.6e}, fpd {:.6e}",
            ks_traj.m0, fpd_traj.m0
        ));
    }

    let dir = output_dir(&ks);
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    write_timeseries(&max_norm_series(&ks_traj, "max_rho")?, &dir.join("ks_maxnorm.csv")).map_err(|e| e.to_string())?;
    write_timeseries(&max_norm_series(&fpd_traj, "max_u_plus_w")?, &dir.join("fpd_maxnorm.csv"))
        .map_err(|e| e.to_string())?;

    let ks_flag = matches!(ks_traj.outcome, Outcome::BlowUp { .. });
    let first = match &fpd_traj.snapshots[0] {
        SimState::Foraging(s) => s.u.max() + s.w.max(),
        SimState::KellerSegel(s) => s.rho.max(),
    };
    let fpd_bounded = fpd_traj.outcome == Outcome::Completed && peak_max_norm(&fpd_traj) <= 10.0 * first;
    println!("mass: {:.6e}", ks_traj.m0);
    match &ks_traj.outcome {
        Outcome::BlowUp { t, max } => println!("ks: growth flag at t = {t:.6e}, max rho = {max:.6e}"),
        o => println!("ks: {}", outcome_line(o)),
    }
    println!(
        "fpd: {} at t = {}, peak |u|inf + |w|inf = {:.6e} (initial {:.6e})",
        outcome_line(&fpd_traj.outcome),
        fpd_traj.last().t(),
        peak_max_norm(&fpd_traj),
        first
    );
    println!("series: {}", dir.display());
    println!(
        "verdict: KS growth flag {}; FPD {}",
        if ks_flag { "set" } else { "not set" },
        if fpd_bounded { "bounded" } else { "not bounded" }
    );
    Ok(0)
}

fn cmd_verify(dir: &Path) -> CliResult<u8> {
    let (_, traj) = load_run(dir).map_err(|e| e.to_string())?;
    let paired_dir = dir.join("paired");
    let paired = if paired_dir.is_dir() {
        Some(load_run(&paired_dir).map_err(|e| e.to_string())?.1)
    } else {
        None
    };
    let report = verify_estimates(&traj, paired.as_ref(), &EstimateTolerances::default());
    print!("{report}");
    Ok(if report.passed() { 0 } else { 1 })
}

fn cmd_oracle(n: usize, dt: f64) -> CliResult<u8> {
    let spec = OracleSpec {
        n,
        dt,
        ..OracleSpec::default()
    };
    let report = oracle_check(&spec).map_err(|e| e.to_string())?;
    print!("{report}");
    Ok(if report.passed() { 0 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Run { scenario } => cmd_run(scenario),
        Command::KsCompare { ks, fpd } => cmd_ks_compare(ks, fpd.as_deref()),
        Command::VerifyEstimates { dir } => cmd_verify(dir),
        Command::OracleCheck { n, dt } => cmd_oracle(*n, *dt),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
