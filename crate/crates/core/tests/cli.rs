//! End-to-end runs of the `zeitlin` binary.

use std::path::Path;
use std::process::{Command, Output};

use zeitlin_core::diagnostics::csv_header;
use zeitlin_core::harness::{IntegratorKind, RunConfig};
use zeitlin_core::scenarios::ScenarioSpec;

fn zeitlin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeitlin")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, cfg: &serde_json::Value) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn small_run(kind: IntegratorKind, dt: f64, t: f64) -> serde_json::Value {
    let mut sc = ScenarioSpec::random_spectrum(4, 11);
    sc.spectrum_range = [0.1, 1.0];
    let mut cfg = RunConfig::new(sc, kind, dt, t);
    if kind.is_factored() {
        cfg.r = Some(2);
    }
    serde_json::to_value(cfg).unwrap()
}

fn csv_in(dir: &Path) -> String {
    let entry = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("diagnostics-"))
        .expect("diagnostics CSV written");
    std::fs::read_to_string(entry).unwrap()
}

fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_owned()).collect()
}

#[test]
fn single_step_run_writes_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let v = small_run(IntegratorKind::Iso2, 0.1, 0.1);
    let k_max = v["k-max"].as_u64().unwrap() as usize;
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let res = zeitlin(&["simulate", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = csv_in(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], csv_header(k_max));
    assert!(out.join("manifest.json").exists());
    let summary: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["steps"], 1);
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_run(IntegratorKind::Rkmk2, 0.05, 0.5));
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let res = zeitlin(&["simulate", "--config", &cfg, "--output", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        runs.push(without_wall_time(&csv_in(&out)));
    }
    assert_eq!(runs[0].len(), 12);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_flag_changes_the_initial_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_run(IntegratorKind::Iso2, 0.1, 0.1));
    let mut first = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let res = zeitlin(&["simulate", "--config", &cfg, "--output", out.to_str().unwrap(), "--seed", seed]);
        assert!(res.status.success());
        first.push(without_wall_time(&csv_in(&out))[1].clone());
    }
    assert_ne!(first[0], first[1]);
}

#[test]
fn unknown_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = small_run(IntegratorKind::Iso2, 0.1, 0.1);
    v["bogus"] = serde_json::json!(1);
    let cfg = write_config(tmp.path(), &v);
    let res = zeitlin(&["simulate", "--config", &cfg, "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));
}

#[test]
fn mismatched_step_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_run(IntegratorKind::Iso2, 0.3, 1.0));
    let res = zeitlin(&["simulate", "--config", &cfg, "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let res = zeitlin(&["simulate", "--config", "/no/such/config.json"]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/no/such/config.json"));
}

#[test]
fn basis_check_reports_every_size() {
    let tmp = tempfile::tempdir().unwrap();
    let res = zeitlin(&["basis-check", "--sizes", "2,5", "--output", tmp.path().to_str().unwrap()]);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(tmp.path().join("basis-check.json").exists());
}

#[test]
fn bench_writes_a_csv_per_kernel() {
    let tmp = tempfile::tempdir().unwrap();
    let res = zeitlin(&["bench", "--kind", "stream", "--sizes", "8,12,16,24", "--reps", "1", "--output", tmp.path().to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("bench-stream.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
