use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfg_cli::{Overrides, ScenarioConfig};
use mfg_core::lq_systemic::{solve_riccati, LoopKind, LqParams, Players};
use mfg_core::numerics::TimeGrid;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn mfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

/// Runs `mfg run` with `out_dir` inside `dir` and returns the exit code.
fn run(dir: &Path, config: &Value, out: &str, extra: &[&str]) -> (i32, PathBuf, String) {
    let cfg = write_config(dir, &format!("{out}.json"), config);
    let out_dir = dir.join(out);
    let mut args = vec![
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = mfg(&args);
    (
        o.status.code().unwrap(),
        out_dir,
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.split("\r\n").filter(|l| !l.is_empty());
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(table: &(Vec<String>, Vec<Vec<f64>>), name: &str) -> Vec<f64> {
    let idx = table
        .0
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    table.1.iter().map(|r| r[idx]).collect()
}

fn sha256_file(path: &Path) -> String {
    Sha256::digest(std::fs::read(path).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn manifest(out_dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap()
}

fn systemic(eps: f64, c: f64) -> Value {
    json!({
        "scenario": "systemic-risk",
        "params": { "a": 1.0, "q": 1.0, "eps": eps, "c": c, "sigma": 1.0, "rho": 0.5, "n_players": 5, "horizon": 1.0 },
        "seed": 7,
        "steps": 100,
        "paths": 200
    })
}

#[test]
fn list_scenarios_names_all_seven() {
    let o = mfg(&["list-scenarios"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "systemic-risk",
        "growth-pareto",
        "aiyagari",
        "macro-one-pop",
        "macro-two-pop",
        "epidemic-contract",
        "mining",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn unknown_scenario_exits_2_without_manifest() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(
        dir.path(),
        &json!({ "scenario": "weather", "params": {} }),
        "bad",
        &[],
    );
    assert_eq!(code, 2);
    assert!(err.contains("scenario"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn schema_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let mut cfg = systemic(2.0, 0.5);
    cfg["params"]["kappa"] = json!(1.0);
    let (code, _, err) = run(dir.path(), &cfg, "extra", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("params") && err.contains("kappa"), "{err}");

    let mut cfg = systemic(2.0, 0.5);
    cfg["params"].as_object_mut().unwrap().remove("sigma");
    let (code, _, err) = run(dir.path(), &cfg, "missing", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("sigma"), "{err}");

    let mut cfg = systemic(2.0, 0.5);
    cfg["sead"] = json!(3);
    let (code, _, err) = run(dir.path(), &cfg, "typo", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("sead"), "{err}");
}

#[test]
fn model_parameter_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    // eps below q² is outside the solvable class
    let (code, _, err) = run(dir.path(), &systemic(0.5, 0.0), "eps", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("eps"), "{err}");
    let infeasible = json!({
        "scenario": "macro-one-pop",
        "params": { "a": 0.15, "rho": 0.05, "kappa": 2.0, "delta": 0.03, "sigma": 0.2, "sigma0": 0.1, "muM": 0.02, "sigmaM": 0.1 }
    });
    let (code, out, _) = run(dir.path(), &infeasible, "onepop", &[]);
    assert_eq!(code, 2);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn io_failures_exit_4() {
    let dir = TempDir::new().unwrap();
    let o = mfg(&["run", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    // out_dir occupied by a plain file
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), "c.json", &systemic(2.0, 0.5));
    let o = mfg(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn non_convergence_exits_3_with_residual_history() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "scenario": "aiyagari",
        "params": { "alpha": 0.36, "delta": 0.05, "gamma": 0.5, "max_iter": 3 },
        "steps": 50,
        "paths": 500,
        "tol": 1e-12
    });
    let (code, out, _) = run(dir.path(), &cfg, "stuck", &[]);
    assert_eq!(code, 3);
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["exit_code"], 3);
    assert_eq!(m["residual_history"].as_array().unwrap().len(), 3);
    assert!(m["error"].as_str().unwrap().contains("convergence"));
}

#[test]
fn zero_riccati_case_writes_zero_eta_columns() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(dir.path(), &systemic(1.0, 0.0), "zero", &[]);
    assert_eq!(code, 0, "{err}");
    let table = read_csv(&out.join("riccati.csv"));
    assert_eq!(table.0, ["t", "eta_open", "eta_closed", "eta_limit"]);
    for name in ["eta_open", "eta_closed", "eta_limit"] {
        assert!(column(&table, name).iter().all(|v| *v == 0.0), "{name}");
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = TempDir::new().unwrap();
    let (code, out, _) = run(dir.path(), &systemic(2.0, 0.5), "exact", &[]);
    assert_eq!(code, 0);
    let table = read_csv(&out.join("riccati.csv"));
    let params = LqParams {
        a: 1.0,
        q: 1.0,
        eps: 2.0,
        c: 0.5,
        sigma: 1.0,
        rho_corr: 0.5,
        n_players: Players::Finite(5),
        horizon: 1.0,
    };
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let closed = solve_riccati(&params, &grid, LoopKind::Closed).unwrap();
    let limit = solve_riccati(
        &LqParams {
            n_players: Players::Infinite,
            ..params
        },
        &grid,
        LoopKind::Limit,
    )
    .unwrap();
    assert_eq!(column(&table, "eta_closed"), closed.eta);
    assert_eq!(column(&table, "eta_limit"), limit.eta);
    assert_eq!(column(&table, "t"), grid.times());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (c1, a, _) = run(dir.path(), &systemic(2.0, 0.5), "first", &[]);
    let (c2, b, _) = run(dir.path(), &systemic(2.0, 0.5), "second", &[]);
    assert_eq!((c1, c2), (0, 0));
    let ma = manifest(&a);
    let mb = manifest(&b);
    let files: Vec<&str> = ma["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["file"].as_str().unwrap())
        .collect();
    assert!(files.contains(&"mean_path.csv"));
    for (x, y) in ma["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .zip(mb["artifacts"].as_array().unwrap())
    {
        let file = x["file"].as_str().unwrap();
        assert_eq!(
            sha256_file(&a.join(file)),
            sha256_file(&b.join(file)),
            "{file}"
        );
        assert_eq!(x["sha256"], y["sha256"]);
    }
}

#[test]
fn manifest_lists_existing_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "scenario": "mining",
        "params": { "r": 0.05, "delta": 0.1, "lambda": 0.5, "eps": 0.1, "c": 0.2, "n_cells": 400 },
        "steps": 200
    });
    let (code, out, err) = run(dir.path(), &cfg, "mine", &[]);
    assert_eq!(code, 0, "{err}");
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["scenario"], "mining");
    assert_eq!(m["config"]["out_dir"], out.to_str().unwrap());
    for a in m["artifacts"].as_array().unwrap() {
        let path = out.join(a["file"].as_str().unwrap());
        assert_eq!(
            std::fs::metadata(&path).unwrap().len(),
            a["bytes"].as_u64().unwrap()
        );
        assert_eq!(sha256_file(&path), a["sha256"].as_str().unwrap());
    }
    // nothing but the listed artifacts and the manifest
    let listed = m["artifacts"].as_array().unwrap().len();
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), listed + 1);
    let value = read_csv(&out.join("value.csv"));
    assert_eq!(value.1.len(), 401);
    assert!(column(&value, "residual").iter().all(|r| r.abs() < 1e-8));
}

#[test]
fn flags_override_file_values() {
    let dir = TempDir::new().unwrap();
    let (code, base, _) = run(dir.path(), &systemic(2.0, 0.5), "base", &[]);
    assert_eq!(code, 0);
    let (code, flagged, _) = run(
        dir.path(),
        &systemic(2.0, 0.5),
        "flagged",
        &["--steps", "40", "--seed", "9", "--paths", "50"],
    );
    assert_eq!(code, 0);
    assert_eq!(read_csv(&flagged.join("riccati.csv")).1.len(), 41);
    assert_eq!(read_csv(&base.join("riccati.csv")).1.len(), 101);
    let m = manifest(&flagged);
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["paths"], 50);

    let mut cfg = ScenarioConfig::from_json(&systemic(2.0, 0.5).to_string()).unwrap();
    cfg.apply(&Overrides {
        tol: Some(1e-3),
        ..Default::default()
    });
    assert_eq!((cfg.seed, cfg.steps, cfg.tol), (7, Some(100), Some(1e-3)));
}

#[test]
fn validate_checks_without_writing() {
    let dir = TempDir::new().unwrap();
    let mut cfg = systemic(2.0, 0.5);
    cfg["out_dir"] = json!(dir.path().join("never").to_str().unwrap());
    let path = write_config(dir.path(), "v.json", &cfg);
    let o = mfg(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("never").exists());
    cfg["params"]["eps"] = json!(0.1);
    let path = write_config(dir.path(), "v2.json", &cfg);
    assert_eq!(
        mfg(&["validate", path.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn custom_matrix_contract_reaches_planner_value() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "scenario": "epidemic-contract",
        "params": {
            "model": "custom-matrix",
            "custom": {
                "base_rates": [[0.0, 0.5], [0.5, 0.0]],
                "lambda": [[0.0, 1.0], [0.0, 0.0]],
                "alpha_lo": 0.0, "alpha_hi": 1.0,
                "c1": [0.0, 0.0], "gamma": [1.0, 1.0],
                "horizon": 1.0, "p0": [1.0, 0.0], "kappa": 0.0,
                "flow_weights": [5.0, 0.0], "terminal_weights": [5.0, 0.0]
            },
            "search": { "r_knots": 1, "xi_lo": -10.0, "xi_hi": 10.0, "max_evals": 400, "penalty": 1e4 }
        }
    });
    let (code, out, err) = run(dir.path(), &cfg, "toy", &[]);
    assert_eq!(code, 0, "{err}");
    let s: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let e2 = (-2.0f64).exp();
    let want = 5.5 * (0.25 + 0.375 * (1.0 - e2)) + 5.0 * (0.25 + 0.75 * e2);
    assert!((s["V"].as_f64().unwrap() - want).abs() < 1e-3, "{}", s["V"]);
    assert_eq!(s["feasible"], true);
    let table = read_csv(&out.join("contract.csv"));
    assert_eq!(
        table.0,
        ["t", "p_s0", "p_s1", "u_s0", "u_s1", "alpha_s0", "alpha_s1"]
    );
    for row in &table.1 {
        assert!((row[1] + row[2] - 1.0).abs() < 1e-10);
    }
    assert!(out.join("plain.csv").exists());
}

#[test]
fn epidemic_overrides_reject_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "scenario": "epidemic-contract",
        "params": { "epidemic": { "kapa": 2.0 } }
    });
    let path = write_config(dir.path(), "e.json", &cfg);
    let o = mfg(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kapa"));
}
