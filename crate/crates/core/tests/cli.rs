use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lastpassage"))
        .args(args)
        .env_remove("LASTPASSAGE_OUT_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_bessel() {
    let out = lp(&["solve", "--family", "bessel", "--delta", "3", "--z", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["schema"], "lastpassage.solve/1");
    assert_eq!(doc["model"]["family"], "bessel");
    assert_eq!(doc["method"], "closed_form_power_law");
    assert!((doc["r_star"].as_f64().unwrap() - 2.879385241571817).abs() < 1e-9);
    assert!((doc["cost_root"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    for key in ["z", "residual", "iterations"] {
        assert!(doc.get(key).is_some(), "{key}");
    }
}

#[test]
fn solve_scales_with_z() {
    let out = lp(&["solve", "--family", "gbm", "--lambda", "1", "--sigma", "1", "--z", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out)["r_star"].as_f64().unwrap();
    assert!((r - 2.0 * 5.356693980033321).abs() < 1e-8, "{r}");
}

#[test]
fn non_transient_model_is_input_error() {
    let out = lp(&["solve", "--family", "gbm", "--lambda", "0.4", "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(err["schema"], "lastpassage.error/1");
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("not transient"));
}

#[test]
fn usage_errors() {
    assert_eq!(lp(&["solve"]).status.code(), Some(2));
    assert_eq!(lp(&["solve", "--family", "heston"]).status.code(), Some(2));
    assert_eq!(lp(&["solve", "--family", "bessel", "--delta", "3", "--z", "-1"]).status.code(), Some(2));
    assert_eq!(lp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lp(&["--help"]).status.code(), Some(0));
}

#[test]
fn model_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("m.json");
    std::fs::write(&good, r#"{"family": "squared_bessel", "params": {"delta": 4}}"#).unwrap();
    let out = lp(&["solve", "--model-file", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!((json(&out)["r_star"].as_f64().unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-10);

    let custom = dir.path().join("c.json");
    std::fs::write(&custom, r#"{"family": "custom", "params": {"drift": "1/x", "diffusion": "1"}}"#).unwrap();
    let out = lp(&["solve", "--model-file", custom.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!((json(&out)["r_star"].as_f64().unwrap() - 2.879385241571817).abs() < 1e-6);

    let bad = dir.path().join("b.json");
    std::fs::write(&bad, r#"{"family": "bessel"}"#).unwrap();
    assert_eq!(lp(&["solve", "--model-file", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lp(&["solve", "--model-file", "/nonexistent/m.json"]).status.code(), Some(2));
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn value_curves() {
    let dir = tempfile::tempdir().unwrap();
    for (family, extra, r_star) in [
        ("bessel", ["--delta", "3"], 2.87939),
        ("squared-bessel", ["--delta", "4"], 3.41421),
    ] {
        let path = dir.path().join(format!("{family}.csv"));
        let mut args = vec!["value", "--family", family];
        args.extend(extra);
        args.extend(["--out", path.to_str().unwrap()]);
        let out = lp(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let rows = read_csv(&path);
        assert_eq!(rows[0], ["x", "V", "Vprime", "method"]);
        assert_eq!(rows.len(), 401);
        for row in &rows[1..] {
            let x: f64 = row[0].parse().unwrap();
            let v: f64 = row[1].parse().unwrap();
            assert!(v <= 0.0, "{family}: V({x}) = {v}");
            if x >= r_star + 1e-5 {
                assert_eq!(v, 0.0, "{family}: V({x}) = {v}");
            }
        }
    }
}

#[test]
fn solve_then_value_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let out = lp(&["solve", "--family", "explosive", "--lambda", "1", "--kappa", "1", "--p", "2", "--out", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = lp(&["value", "--r-star-from", sol.to_str().unwrap(), "--verify", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["schema"], "lastpassage.value/1");
    assert_eq!(doc["solved"], false);
    assert_eq!(doc["verification_passed"], true);
    assert_eq!(doc["verification"]["smooth_fit_ok"], true);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(doc["r_star"], saved["r_star"]);

    // A solution for another model is rejected.
    let out = lp(&["value", "--family", "bessel", "--delta", "3", "--r-star-from", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_report_beside_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gbm.csv");
    let out = lp(&["value", "--family", "gbm", "--lambda", "1", "--sigma", "1", "--verify", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gbm.verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["verification"]["origin_numeric"], "divergent");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lastpassage"))
        .args(["solve", "--family", "bessel", "--delta", "3"])
        .env("LASTPASSAGE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert_eq!(doc["schema"], "lastpassage.solve/1");
}

#[test]
fn one_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let per_path = dir.path().join("paths.csv");
    let out = lp(&[
        "sweep", "--family", "bessel", "--delta", "3", "--r", "2.5", "--paths", "200", "--format", "json",
        "--paths-out", per_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["schema"], "lastpassage.sweep/1");
    assert_eq!(doc["argmin_r"], 2.5);
    assert_eq!(doc["points"].as_array().unwrap().len(), 1);
    let rows = read_csv(&per_path);
    assert_eq!(rows[0], ["path_id", "gamma_z", "tau_r", "payoff", "censored", "exploded"]);
    assert_eq!(rows.len(), 201);
}

#[test]
fn default_sweep_brackets_threshold() {
    let out = lp(&["sweep", "--family", "bessel", "--delta", "3", "--paths", "4000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,mean,std_error,n_paths,censor_fraction"));
    assert_eq!(lines.count(), 9);
    let err = stderr(&out);
    let argmin: f64 = err.lines().find_map(|l| l.strip_prefix("argmin_r=")).unwrap().parse().unwrap();
    // grid cells are 0.1 r* wide
    assert!((argmin - 2.879385241571817).abs() <= 0.1 * 2.879385241571817 + 1e-9, "{argmin}");
}

#[test]
fn censoring_warns_but_succeeds() {
    let out = lp(&["sweep", "--family", "bessel", "--delta", "3", "--r", "2", "--paths", "50", "--tmax", "0.001", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!(doc["warning"].as_str().unwrap().contains("censored"));
}
