use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use tempfile::TempDir;

use formica::scenario::{parse_scenario, Builder};

fn formica(args: &[&str], env: Option<(&str, &Path)>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_formica"));
    cmd.args(args).env_remove("FORMICA_OUTPUT_DIR");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fpd_cfg(dir: &Path, name: &str, nx: usize, amp: f64) -> PathBuf {
    let out = dir.join(format!("{name}_out"));
    let text = format!(
        "[grid]\nnx = {nx}\nny = {nx}\n\n[params]\nn = disk(0.5, 0.5, 0.2, 2, 0)\nc = gaussian(0.3, 0.7, 0.1, 2)\n\
         v = ramp_to_point(0.5, 0.5, 1)\n\n[initial]\nu = gaussian(0.5, 0.4, 0.1, 1) + gaussian(0.2, 0.2, 0.05, {amp:?})\n\
         w = noise(0, 0.1)\n\n[run]\nt_end = 0.2\ndt_max = 2e-3\nsnapshot_every = 10\nseed = 3\noutput = \"{}\"\n",
        out.display()
    );
    let path = dir.join(format!("{name}.cfg"));
    fs::write(&path, text).unwrap();
    path
}

const KS: &str = "[grid]\nnx = 48\nny = 48\n\n[model]\nkind = ks\n\n[initial]\nrho = gaussian_mass(0.5, 0.5, 0.05, 40)\n\n\
                  [run]\nt_end = 0.5\nblowup_factor = 5\nsnapshot_every = 20\n";

#[test]
fn run_verify_and_paired_stability() {
    let tmp = TempDir::new().unwrap();
    let cfg = fpd_cfg(tmp.path(), "base", 24, 0.0);
    let out = formica(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("mass drift"));

    let run_dir = tmp.path().join("base_out");
    for f in ["scenario.cfg", "series.csv", "outcome.txt"] {
        assert!(run_dir.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(run_dir.join("outcome.txt")).unwrap().trim(), "completed");

    let verify = formica(&["verify-estimates", run_dir.to_str().unwrap()], None);
    let report = stdout(&verify);
    assert!(report.contains("mass") && !report.contains("stability"), "{report}");

    let paired = fpd_cfg(tmp.path(), "paired", 24, 1e-6);
    let o = formica(&["run", paired.to_str().unwrap()], Some(("FORMICA_OUTPUT_DIR", &run_dir.join("paired"))));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let verify = formica(&["verify-estimates", run_dir.to_str().unwrap()], None);
    let report = stdout(&verify);
    assert!(report.lines().any(|l| l.starts_with("PASS stability")), "{report}");
    assert!(!tmp.path().join("paired_out").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = fpd_cfg(tmp.path(), "det", 16, 0.5);
    let snaps = |sub: &str| {
        let dir = tmp.path().join(sub);
        let o = formica(&["run", cfg.to_str().unwrap()], Some(("FORMICA_OUTPUT_DIR", &dir)));
        assert_eq!(o.status.code(), Some(0));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("snapshots"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        (files, fs::read(dir.join("series.csv")).unwrap())
    };
    let a = snaps("a");
    assert!(!a.0.is_empty());
    assert_eq!(a, snaps("b"));
}

#[test]
fn ks_blowup_exit_code_and_comparison() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("ks.cfg");
    fs::write(&cfg, KS).unwrap();
    let out_dir = tmp.path().join("ks_out");
    let env = Some(("FORMICA_OUTPUT_DIR", out_dir.as_path()));

    let o = formica(&["run", cfg.to_str().unwrap()], env);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(fs::read_to_string(out_dir.join("outcome.txt")).unwrap().starts_with("blowup"));

    let o = formica(&["ks-compare", cfg.to_str().unwrap()], env);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: KS growth flag set; FPD bounded"));
    assert!(out_dir.join("ks_maxnorm.csv").is_file() && out_dir.join("fpd_maxnorm.csv").is_file());
}

#[test]
fn error_exit_codes() {
    let o = formica(&["run", "missing.cfg"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.cfg"));

    assert_eq!(formica(&["frobnicate"], None).status.code(), Some(64));
    assert_eq!(formica(&["run"], None).status.code(), Some(64));
    assert_eq!(formica(&["--help"], None).status.code(), Some(0));

    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "[grid]\nnx = 8\n\n[params]\nn = constant(-1)\n").unwrap();
    let o = formica(&["run", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(H)"), "{}", stderr(&o));
}

fn builder() -> impl Strategy<Value = Builder> {
    let unit = 0.0f64..1.0;
    prop_oneof![
        (0.0f64..10.0).prop_map(Builder::Constant),
        (unit.clone(), unit.clone(), 0.01f64..0.3, 0.0f64..5.0)
            .prop_map(|(cx, cy, sigma, amplitude)| Builder::Gaussian { cx, cy, sigma, amplitude }),
        (unit.clone(), unit.clone(), 0.01f64..0.5, 0.0f64..5.0, 0.0f64..5.0)
            .prop_map(|(cx, cy, radius, inside, outside)| Builder::Disk { cx, cy, radius, inside, outside }),
        (0.0f64..1.0, 1.0f64..2.0).prop_map(|(lo, w)| Builder::Noise { lo, hi: lo + w }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_form_roundtrips(
        nx in 4usize..40,
        parts in prop::collection::vec(builder(), 1..4),
        food in builder(),
        chi in 0.0f64..10.0,
        seed in any::<u64>(),
        spd in any::<bool>(),
    ) {
        let u = parts.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" + ");
        let (kind, extra) = if spd { ("spd", "p = constant(0)\n") } else { ("fpd", "") };
        let text = format!(
            "[grid]\nnx = {nx}\n[model]\nkind = {kind}\n[params]\nchi = {chi:?}\nc = {food}\n\
             [initial]\nu = {u}\nw = constant(0.5)\n{extra}[run]\nseed = {seed}\n"
        );
        let (a, _) = parse_scenario(&text).unwrap();
        let (b, _) = parse_scenario(&a.to_config_string()).unwrap();
        prop_assert_eq!(a, b);
    }
}
