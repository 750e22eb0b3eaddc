//! End-to-end tests of the command-line interface: exit codes, schemas and
//! output determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn barovort(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barovort"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("barovort-test-{}-{}", std::process::id(), name));
    p
}

#[test]
fn lorenz_command_emits_printed_coefficients() {
    let out = barovort(&["lorenz1960", "--k", "1", "--l", "2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["amplitudes"], serde_json::json!(["A", "F", "G"]));
    let a_term = v["terms"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["target"] == "A")
        .unwrap();
    assert!((a_term["coeff"].as_f64().unwrap() + 1.6).abs() < 1e-12);
    assert_eq!(a_term["factors"], serde_json::json!(["F", "G"]));
}

#[test]
fn list_subgroups_has_67_rows_and_lorenz_dimension_3() {
    let path = tmp_path("subgroups.json");
    let out = barovort(&[
        "list-subgroups",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 67);
    // the row addressed by the word "pqe1,pqe2" (canonical elements
    // {1, e1e2, e1pq, e2pq}) has fixed-subspace dimension 3
    let expect = serde_json::json!(["1", "e1e2", "e1pq", "e2pq"]);
    let row = rows
        .iter()
        .find(|r| r["elements"] == expect)
        .expect("lorenz subgroup row");
    assert_eq!(row["dimension"], 3);
    std::fs::remove_file(&path).ok();
}

#[test]
fn verify_solution_pass_and_fail_exit_codes() {
    let out = barovort(&[
        "verify-solution",
        "rossby",
        "--A",
        "1",
        "--k",
        "1",
        "--l",
        "1",
        "--beta",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["report"]["max_abs"].as_f64().unwrap() <= 1e-12);

    // time-dependent eta is reported as FAIL with exit code 2
    let out = barovort(&[
        "verify-solution",
        "partial-invariant",
        "--case",
        "eta-constant",
        "--eta-rate",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], false);
}

#[test]
fn usage_errors_exit_1() {
    let out = barovort(&["verify-solution", "rossby", "--nope", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = barovort(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn transform_verifies_both_maps() {
    for args in [
        vec!["transform", "--kind", "spherical-derotation", "--omega", "2.5"],
        vec![
            "transform",
            "--kind",
            "potential-translation",
            "--beta",
            "1.5",
            "--froude",
            "2.0",
        ],
    ] {
        let out = barovort(&args);
        assert_eq!(out.status.code(), Some(0), "{:?}", args);
        let v = stdout_json(&out);
        assert_eq!(v["report"]["pass"], true);
    }
}

#[test]
fn integrate_writes_deterministic_artifacts() {
    let csv1 = tmp_path("traj1.csv");
    let drift1 = tmp_path("drift1.json");
    let csv2 = tmp_path("traj2.csv");
    let drift2 = tmp_path("drift2.json");
    let cfg = tmp_path("integrate.json");
    let config = serde_json::json!({
        "model": {"kind": "lorenz", "k": 1.0, "l": 2.0},
        "initial": [1.0, 1.0, 1.0],
        "dt": 1e-3,
        "t_end": 1.0,
        "stride": 100,
        "csv_out": csv1,
        "drift_out": drift1,
    });
    std::fs::write(&cfg, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let out = barovort(&["integrate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut config2 = config.clone();
    config2["csv_out"] = serde_json::json!(csv2);
    config2["drift_out"] = serde_json::json!(drift2);
    std::fs::write(&cfg, serde_json::to_string_pretty(&config2).unwrap()).unwrap();
    let out = barovort(&["integrate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());

    // byte-identical across runs
    assert_eq!(
        std::fs::read(&csv1).unwrap(),
        std::fs::read(&csv2).unwrap()
    );
    assert_eq!(
        std::fs::read(&drift1).unwrap(),
        std::fs::read(&drift2).unwrap()
    );

    let csv = std::fs::read_to_string(&csv1).unwrap();
    assert!(csv.starts_with("t,A,F,G\r\n"));
    let drift: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&drift1).unwrap()).unwrap();
    assert!(drift["energy_max_rel_drift"].as_f64().unwrap() <= 1e-8);
    for p in [csv1, csv2, drift1, drift2, cfg] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn integrate_rejects_unknown_config_keys() {
    let cfg = tmp_path("bad.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"kind": "lorenz", "k": 1.0, "l": 2.0},
            "initial": [1,1,1], "dt": 0.001, "t_end": 1.0, "typo_key": 7}"#,
    )
    .unwrap();
    let out = barovort(&["integrate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typo_key"), "stderr: {}", err);
    std::fs::remove_file(&cfg).ok();
}

#[test]
fn reduce_output_round_trips_through_schema() {
    let out = barovort(&["reduce", "--subgroup", "e1e2", "--k", "1", "--l", "2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    // documented schema: amplitudes, terms with named targets/factors, provenance
    assert!(v["amplitudes"].is_array());
    for t in v["terms"].as_array().unwrap() {
        assert!(t["target"].is_string());
        assert!(t["coeff"].is_number());
        assert_eq!(t["factors"].as_array().unwrap().len(), 2);
    }
    assert_eq!(v["provenance"]["subgroup"], "e1e2");
    // re-serializing the parsed value reproduces the bytes (round trip)
    let reserialized = serde_json::to_string_pretty(&v).unwrap() + "\n";
    assert_eq!(reserialized.as_bytes(), &out.stdout[..]);
}

#[test]
fn run_batch_executes_jobs_in_parallel() {
    let out_a = tmp_path("batch-a.json");
    let out_b = tmp_path("batch-b.json");
    let out_c = tmp_path("batch-c.json");
    let out_d = tmp_path("batch-d.json");
    let cfg = tmp_path("batch.json");
    let config = serde_json::json!([
        {"command": "lorenz1960", "params": {"k": 1.0, "l": 2.0, "output": out_a}},
        {"command": "reduce", "params": {"subgroup": "e1e2", "k": 1.0, "l": 2.0, "output": out_b}},
        {"command": "verify-solution",
         "params": {"family": "rossby", "k": 1.0, "l": 1.0, "beta": 1.0, "output": out_c}},
        {"command": "transform",
         "params": {"kind": "potential-translation", "beta": 2.0, "froude": 1.0, "output": out_d}},
    ]);
    std::fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    let out = barovort(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_a).unwrap()).unwrap();
    assert_eq!(a["amplitudes"], serde_json::json!(["A", "F", "G"]));
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_b).unwrap()).unwrap();
    assert_eq!(b["provenance"]["subgroup"], "e1e2");
    let c: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_c).unwrap()).unwrap();
    assert_eq!(c["pass"], true);
    let d: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_d).unwrap()).unwrap();
    assert_eq!(d["report"]["pass"], true);
    for p in [out_a, out_b, out_c, out_d, cfg] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn run_batch_verification_failure_exits_2() {
    let cfg = tmp_path("batch-fail.json");
    let config = serde_json::json!({
        "command": "verify-solution",
        "params": {"family": "partial-invariant", "case": "eta-constant", "eta_rate": 1.0}
    });
    std::fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    let out = barovort(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(&cfg).ok();
}

#[test]
fn bracket_table_reports_structure() {
    let path = tmp_path("table.json");
    let out = barovort(&[
        "bracket-table",
        "--catalog",
        "cartesian",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let basis: Vec<&str> = v["basis"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b.as_str().unwrap())
        .collect();
    assert_eq!(basis, vec!["D", "∂t", "∂y", "X(f)", "Z(g)"]);
    let table = v["table"].as_array().unwrap();
    // [D, dt] = -dt
    let d_dt = table[0][1].as_str().unwrap();
    assert!(d_dt.contains("∂t"));
    // diagonal entries vanish
    for i in 0..basis.len() {
        assert_eq!(table[i][i], "0");
    }
    std::fs::remove_file(&path).ok();
}
