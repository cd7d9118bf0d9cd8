//! Exit-code and output contracts of the installed binary.

use std::path::Path;
use std::process::{Command, Output};

fn gridbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn validate_accepts_shipped_presets() {
    for preset in ["toy.toml", "desk.toml", "paper.toml"] {
        let out = gridbench(&["validate", &format!("../../configs/{preset}")]);
        assert_eq!(out.status.code(), Some(0), "{preset}: {out:?}");
    }
}

#[test]
fn run_succeeds_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = gridbench(&[
        "run",
        "../../configs/toy.toml",
        "--quiet",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(out_dir.join("manifest.json").is_file());
    assert!(out_dir.join("report_oracle.json").is_file());
    assert!(out_dir.join("report_oracle.csv").is_file());
    assert!(out_dir.join("log.txt").is_file());

    let csv = std::fs::read_to_string(out_dir.join("report_oracle.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("s_t,s_d,rce,rvs,rvm,nvc,nvt,feasible,outage_line,coefficient")
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn config_problems_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();

    let broken = dir.path().join("broken.toml");
    write(&broken, "this is not toml [");
    let out = gridbench(&["run", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");

    let missing_inputs = dir.path().join("missing.toml");
    write(
        &missing_inputs,
        r#"
case = "nope.json"
demand = "nope.csv"
seed = 1
output_dir = "out"
[horizon]
n_t = 1
n_tau = 1
[demand_scenarios]
count = 1
low = 1.0
high = 1.0
[[policies]]
kind = "oracle"
"#,
    );
    let out = gridbench(&["validate", missing_inputs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope.json"), "{stderr}");
    assert!(stderr.contains("nope.csv"), "{stderr}");
}

#[test]
fn unwritable_output_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    write(&blocker, "a file, not a directory");
    let out = gridbench(&[
        "run",
        "../../configs/toy.toml",
        "--quiet",
        "--output-dir",
        blocker.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn all_infeasible_sweep_exits_with_code_three_but_reports() {
    // A 50 MW unit cannot serve 90 MW in any scenario; every baseline is
    // infeasible, the run still writes its outputs.
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("case.json"),
        r#"{
  "name": "short",
  "base_mva": 100.0,
  "buses": [{"id": 1, "slack": true}, {"id": 2}],
  "lines": [{"id": 1, "from": 1, "to": 2, "susceptance_pu": 10.0, "flow_limit_mw": 500.0}],
  "units": [{"id": 1, "bus": 1, "p_min_mw": 0.0, "p_max_mw": 50.0,
             "ramp_up_mw": 50.0, "ramp_down_mw": 50.0,
             "cost_a": 0.01, "cost_b": 5.0, "cost_c": 0.0}]
}"#,
    );
    write(
        &dir.path().join("demand.csv"),
        "bus_1,bus_2\n0.0,90.0\n0.0,90.0\n",
    );
    write(
        &dir.path().join("run.toml"),
        r#"
case = "case.json"
demand = "demand.csv"
seed = 5
output_dir = "out"
[horizon]
n_t = 2
n_tau = 1
[demand_scenarios]
count = 1
low = 1.0
high = 1.0
[[policies]]
kind = "oracle"
"#,
    );
    let out = gridbench(&["run", dir.path().join("run.toml").to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/report_oracle.json")).unwrap(),
    )
    .unwrap();
    assert!(report["aggregate"].is_null());
    let rows = report["scenarios"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["feasible_baseline"].as_bool(), Some(false));
    assert!(rows[0]["skip_reason"].as_str().unwrap().contains("window 1"));
}
