use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_savg");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn savg(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_in(dir: &Path, sub: &str, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    savg(&args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "validate", &config("interval_1d.json"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = std::fs::read_to_string(dir.path().join("interval_1d_validate.csv")).unwrap();
    assert!(csv.starts_with("metric,scenario,gamma,t,value,stderr,details\n"));
    assert!(csv.lines().count() > 1);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("interval_1d_validate.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert!(json["provenance"]["wall_time_s"].is_number());
}

#[test]
fn every_bundled_config_validates() {
    for name in ["interval_1d.json", "wright_fisher_2d.json", "counterexample.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), "validate", &config(name), &[]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stdout(&out));
    }
}

#[test]
fn fdd_passes_and_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("interval_1d.json");
    let first = run_in(a.path(), "fdd", &cfg, &[]);
    let second = run_in(b.path(), "fdd", &cfg, &[]);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    assert_eq!(second.status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("interval_1d_fdd.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn seed_changes_values_but_not_verdicts() {
    let cfg = config("interval_1d.json");
    let mut tables = Vec::new();
    for seed in ["11", "12", "13"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), "fdd", &cfg, &["--seed", seed]);
        assert_eq!(out.status.code(), Some(0), "seed {seed}: {}", stdout(&out));
        tables.push(std::fs::read_to_string(dir.path().join("interval_1d_fdd.csv")).unwrap());
    }
    assert_ne!(tables[0], tables[1]);
    assert_ne!(tables[1], tables[2]);
}

#[test]
fn unknown_builtin_exits_2_and_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": "x", "model": {"builtin": "nope"}, "gamma": [1], "t_grid": [1]}"#,
    );
    let out = run_in(dir.path(), "validate", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for name in savg::model::BUILTIN_NAMES {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn decreasing_gamma_is_reported_by_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": "x", "model": {"builtin": "interval_1d"}, "gamma": [10, 1], "t_grid": [1]}"#,
    );
    let out = run_in(dir.path(), "run", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/gamma"), "{}", stderr(&out));
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "validate", &dir.path().join("absent.json"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_aggregates_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), "validate", &config("interval_1d.json"), &[]).status.code(), Some(0));
    let ok = savg(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("all checks passed"));

    let path = dir.path().join("interval_1d_validate.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    json["passed"] = serde_json::Value::Bool(false);
    std::fs::write(dir.path().join("broken.json"), json.to_string()).unwrap();
    let bad = savg(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = savg(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
