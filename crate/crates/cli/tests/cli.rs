use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const OUT_DIR_ENV: &str = "VSSLMS_OUT_DIR";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vsslms"));
    c.env_remove(OUT_DIR_ENV).env("RUST_LOG", "warn");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, rules: &str) -> PathBuf {
    let path = dir.join("experiment.json");
    let text = format!(
        r#"{{
  "model": {{ "m": 4, "covariance": {{ "type": "white", "variance": 1.0 }}, "snr_db": 20.0 }},
  "rules": [{rules}],
  "run": {{ "iters": 400, "trials": 8, "transient_skip": 10 }},
  "outputs": {{ "directory": "{}" }}
}}"#,
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path
}

const KJ_SP: &str = r#"
    { "name": "KJ", "params": { "rule": "kj", "alpha": 0.995, "gamma": 0.001 } },
    { "name": "Sp", "params": { "rule": "sp", "alpha": 0.995, "gamma": 0.001 } }"#;

const FIXED_3: &str = r#"{ "params": { "rule": "fixed", "mu": 3.0 } }"#;

#[test]
fn no_arguments_is_a_usage_error() {
    let o = run(&mut bin());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_and_version_succeed() {
    let o = run(bin().arg("--help"));
    assert_eq!(o.status.code(), Some(0));
    for sub in ["theory", "simulate", "compare", "steadystate", "stability", "reproduce"] {
        assert!(stdout(&o).contains(sub), "help lists {sub}");
    }
    assert_eq!(run(bin().arg("--version")).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
}

#[test]
fn missing_config_file() {
    let tmp = TempDir::new().unwrap();
    let o = run(bin().args(["theory"]).arg(tmp.path().join("nope.json")));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"));
}

#[test]
fn invalid_config_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{ "model": { "m": 0, "snr_db": 20.0 }, "rules": [] }"#).unwrap();
    let o = run(bin().arg("steadystate").arg(&path));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"));

    fs::write(&path, r#"{ "model": { "m": 4, "snr_db": 20.0 }, "rules": [], "extra": 1 }"#).unwrap();
    let o = run(bin().arg("steadystate").arg(&path));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extra"));
}

#[test]
fn stability_reports_unstable_rule_without_failing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), FIXED_3);
    let o = run(bin().arg("stability").arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("UNSTABLE"));
    assert!(tmp.path().join("out/stability.csv").exists());
}

#[test]
fn divergent_simulation_exits_with_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), FIXED_3);
    let o = run(bin().arg("simulate").arg(&cfg));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn steadystate_writes_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), KJ_SP);
    let o = run(bin().arg("steadystate").arg(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/steadystate.csv")).unwrap();
    assert!(csv.starts_with("rule,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("out/steadystate.json").exists());
}

#[test]
fn simulate_and_compare_write_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), KJ_SP);
    let o = run(bin().arg("simulate").arg(&cfg).args(["--iters", "300", "--trials", "4"]));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let curve = fs::read_to_string(tmp.path().join("out/KJ_simulation.csv")).unwrap();
    assert_eq!(curve.lines().count(), 301);

    let o = run(bin().arg("compare").arg(&cfg).args(["--engine", "paper"]));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["KJ_theory.csv", "Sp_theory.csv", "Sp_simulation.csv", "summary.csv", "report.json"] {
        assert!(tmp.path().join("out").join(f).exists(), "missing {f}");
    }
    assert!(stdout(&o).contains("wrote"));
}

#[test]
fn seed_makes_runs_repeatable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), KJ_SP);
    let read = || fs::read_to_string(tmp.path().join("out/Sp_simulation.csv")).unwrap();
    assert!(run(bin().arg("simulate").arg(&cfg).args(["--seed", "7"])).status.success());
    let a = read();
    assert!(run(bin().arg("simulate").arg(&cfg).args(["--seed", "7"])).status.success());
    assert_eq!(a, read());
    assert!(run(bin().arg("simulate").arg(&cfg).args(["--seed", "8"])).status.success());
    assert_ne!(a, read());
}

#[test]
fn reproduce_table_with_small_budget() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("t5");
    let o = run(bin()
        .args(["reproduce", "table5", "--iters", "2000", "--trials", "4", "--out"])
        .arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    for rule in ["KJ", "AM", "NC", "VSQ", "Sp"] {
        assert!(summary.lines().any(|l| l.starts_with(&format!("{rule},"))));
    }
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), KJ_SP);
    let env_out = tmp.path().join("from_env");
    let o = run(bin().env(OUT_DIR_ENV, &env_out).arg("steadystate").arg(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(env_out.join("steadystate.csv").exists());
    assert!(!tmp.path().join("out/steadystate.csv").exists());
}
