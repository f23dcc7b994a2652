//! End-to-end checks of the binary: exit codes, report determinism across
//! runs and worker counts, CSV round trips, and the seed override.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_flowpresheaf")
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn small_scenario() -> &'static str {
    r#"{
        "schema": "flowpresheaf/v1",
        "seed": 42,
        "patch": { "dim": 1, "bounds": [[-4.0, 4.0]] },
        "fields": { "main": ["x1"] },
        "regularity": { "class": "finite", "m": 0 },
        "grids": {
            "k": { "bounds": [[0.0, 1.0]], "counts": [9] },
            "time": [0.0, 0.4],
            "final_time_count": 17,
            "initial_time_count": 1
        },
        "experiments": [
            { "kind": "flow", "field": "main", "samples": 5 },
            { "kind": "seminorm", "field": "main" }
        ]
    }"#
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    cmd.env_remove("FLOWPRESHEAF_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

#[test]
fn validate_accepts_good_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "ok.json", small_scenario());
    let out = run(&["validate", path.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{out:?}");
}

#[test]
fn validate_rejects_bad_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = small_scenario().replace("\"x1\"", "\"x1 +\"");
    let path = write_scenario(dir.path(), "bad.json", &bad);
    let out = run(&["validate", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fields.main"), "stderr: {stderr}");
}

#[test]
fn run_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "ok.json", small_scenario());
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    let r1 = run(
        &[
            "run",
            path.to_str().unwrap(),
            "--out",
            out1.to_str().unwrap(),
            "--workers",
            "1",
        ],
        &[],
    );
    assert_eq!(r1.status.code(), Some(0), "{r1:?}");
    let r2 = run(
        &[
            "run",
            path.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
            "--workers",
            "4",
        ],
        &[],
    );
    assert_eq!(r2.status.code(), Some(0));
    let a = std::fs::read(out1.join("report.json")).unwrap();
    let b = std::fs::read(out2.join("report.json")).unwrap();
    assert_eq!(a, b, "report payloads must be byte-identical");
    // timings live outside the deterministic payload
    assert!(out1.join("timings.json").exists());
}

#[test]
fn csv_round_trips_to_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "ok.json", small_scenario());
    let out = dir.path().join("out");
    let r = run(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(r.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let table = &report["experiments"][0]["tables"][0];
    let name = table["name"].as_str().unwrap();
    let csv_path = out.join(format!("00_{name}.csv"));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    let expected: Vec<Vec<String>> = table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|c| c.as_str().unwrap().to_string())
                .collect()
        })
        .collect();
    assert_eq!(rows, expected);
}

#[test]
fn unknown_format_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "ok.json", small_scenario());
    let out = dir.path().join("out");
    let r = run(
        &[
            "run",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--format",
            "xml",
        ],
        &[],
    );
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown output format"));
}

#[test]
fn env_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "ok.json", small_scenario());
    let out = dir.path().join("out");
    let r = run(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("FLOWPRESHEAF_SEED", "777")],
    );
    assert_eq!(r.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"].as_u64(), Some(777));
}

#[test]
fn invalid_env_seed_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "ok.json", small_scenario());
    let out = dir.path().join("out");
    let r = run(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("FLOWPRESHEAF_SEED", "not-a-number")],
    );
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn failing_experiment_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // expect the wrong dilatation constant
    let body = r#"{
        "schema": "flowpresheaf/v1",
        "seed": 1,
        "patch": { "dim": 1, "bounds": [[-4.0, 4.0]] },
        "fields": { "main": ["x1"] },
        "grids": {
            "k": { "bounds": [[0.0, 1.0]], "counts": [5] },
            "time": [0.0, 0.4]
        },
        "experiments": [
            { "kind": "dil", "field": "main", "order": 0, "expect_constant": 2.0 }
        ]
    }"#;
    let path = write_scenario(dir.path(), "fail.json", body);
    let out = dir.path().join("out");
    let r = run(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn empty_experiment_list_is_success() {
    let dir = tempfile::tempdir().unwrap();
    let body = small_scenario().replace(
        r#""experiments": [
            { "kind": "flow", "field": "main", "samples": 5 },
            { "kind": "seminorm", "field": "main" }
        ]"#,
        r#""experiments": []"#,
    );
    let path = write_scenario(dir.path(), "empty.json", &body);
    let out = dir.path().join("out");
    let r = run(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(r.status.code(), Some(0), "{r:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiments"].as_array().unwrap().len(), 0);
    assert_eq!(report["all_pass"].as_bool(), Some(true));
}

#[test]
fn sweep_emits_plot_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "schema": "flowpresheaf/v1",
        "seed": 5,
        "patch": { "dim": 1, "bounds": [[-4.0, 4.0]] },
        "fields": { "main": ["p1*x1"] },
        "params": { "count": 1, "base": [1.0] },
        "grids": {
            "k": { "bounds": [[0.0, 1.0]], "counts": [9] },
            "time": [0.0, 0.4],
            "final_time_count": 17
        },
        "experiments": [
            { "kind": "param-sweep", "field": "main", "function": "x1", "points": 4, "t_final": 0.4 }
        ]
    }"#;
    let path = write_scenario(dir.path(), "sweep.json", body);
    let out = dir.path().join("out");
    let r = run(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(r.status.code(), Some(0), "{r:?}");
    let plot = out.join("00_param_sweep_main_plot.csv");
    assert!(plot.exists());
    let mut reader = csv::Reader::from_path(&plot).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 2);
}
