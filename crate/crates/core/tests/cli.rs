use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal-reach"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn first_line_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().next().expect("output")).expect("json line")
}

#[test]
fn bounds_split() {
    let out = run(&["bounds", "split", "--N", "2000", "--delta", "0.01"]);
    assert!(out.status.success());
    let v = first_line_json(&out);
    let eps = v["epsilon"].as_f64().unwrap();
    assert!((eps - 0.0023).abs() < 1e-6, "{eps}");
    assert_eq!(v["mode"], "split_lower");
    assert!(String::from_utf8_lossy(&out.stdout).contains("epsilon"));
}

#[test]
fn bounds_robust() {
    let out = run(&["bounds", "robust", "--N", "500", "--p", "50", "--eps", "0.15"]);
    assert!(out.status.success());
    let v = first_line_json(&out);
    let delta = v["delta"].as_f64().unwrap();
    assert!(((1.0 - delta) - 0.989).abs() < 1e-3);
}

#[test]
fn bounds_robust_table() {
    let out = run(&[
        "bounds",
        "robust-table",
        "--outlier-frac",
        "0.05",
        "--sizes",
        "100,500,1000,2000",
        "--eps",
        "0.04,0.05,0.06,0.10",
    ]);
    assert!(out.status.success());
    let v = first_line_json(&out);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0]["p"], 5);
    assert_eq!(rows[15]["p"], 100);
}

#[test]
fn validation_errors_exit_2_with_json() {
    let out = run(&["bounds", "robust", "--N", "10", "--p", "5", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "outlier_budget");

    let out = run(&["--mode", "robust", "--eps", "0.1", "coverage-trials"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_fit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("line.csv");
    fs::write(&data, "x1,x2\n0,0\n1,1\n2,2\n3,3\n4,4\n5,5\n6,6\n7,7\n").unwrap();
    let model = dir.path().join("model.json");
    let out = run(&["-d", "1", "--rescale", "false", "fit", "--data", data.to_str().unwrap(), "--out", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    let common = ["--seed", "11", "--M", "600", "--N", "100", "-d", "6"];
    for round in 0..2 {
        let data = d(&format!("data{round}.csv"));
        let model = d(&format!("model{round}.json"));
        let est = d(&format!("est{round}.json"));
        let cal = d("cal.csv");
        let out = bin().args(common).args(["sample", "--out", data.to_str().unwrap()]).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = bin()
            .args(common)
            .args(["fit", "--data", data.to_str().unwrap(), "--out", model.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::write(&cal, "x1,x2\n1.5,1.5\n-2,2.5\n").unwrap();
        let out = bin()
            .args(common)
            .args([
                "calibrate",
                "--model",
                model.to_str().unwrap(),
                "--data",
                cal.to_str().unwrap(),
                "--out",
                est.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for name in ["data", "model", "est"] {
        let ext = if name == "data" { "csv" } else { "json" };
        assert_eq!(read(&d(&format!("{name}0.{ext}"))), read(&d(&format!("{name}1.{ext}"))));
    }
    assert!(d("data0.manifest.json").exists());
    assert!(d("model0.json.resolved.json").exists());

    // Two-point calibration: threshold is the larger score.
    let est: Value = serde_json::from_str(&read(&d("est0.json"))).unwrap();
    let scores = est["calibration_scores"].as_array().unwrap();
    assert_eq!(scores.len(), 2);
    assert_eq!(est["threshold"], scores[0]);
    assert!(scores[0].as_f64() >= scores[1].as_f64());
}

#[test]
fn manifest_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    fs::write(&manifest, r#"{"degree": 4, "total_samples": 300, "calibration_size": 50, "seed": 2}"#).unwrap();
    let out_path = dir.path().join("est.json");
    let out = run(&[
        "--manifest",
        manifest.to_str().unwrap(),
        "-d",
        "5",
        "calibrate",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo: Value = serde_json::from_str(&read(&dir.path().join("est.json.resolved.json"))).unwrap();
    assert_eq!(echo["manifest"]["degree"], 5);
    assert_eq!(echo["manifest"]["total_samples"], 300);
    assert_eq!(echo["manifest"]["delta"], 0.01);
    let est: Value = serde_json::from_str(&read(&out_path)).unwrap();
    assert_eq!(est["model"]["basis"]["degree"], 5);
}

#[test]
fn transductive_queries() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out = run(&["--seed", "3", "--M", "400", "--N", "100", "sample", "--out", data.to_str().unwrap()]);
    assert!(out.status.success());
    let queries = dir.path().join("q.csv");
    fs::write(&queries, "x1,x2\n2,2\n100,100\n").unwrap();
    let out = run(&["-d", "4", "transductive", "--data", data.to_str().unwrap(), "--queries", queries.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,count,total,p_value,member");
    assert!(lines[1].ends_with(",1"));
    assert_eq!(lines[2], "100,100,0,400,0,0");
}

#[test]
fn grid_and_fp_rate() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.csv");
    let svg = dir.path().join("g.svg");
    let common = ["--seed", "5", "--M", "2000", "--N", "400", "-d", "8", "--resolution", "30"];
    let out = bin()
        .args(common)
        .args(["grid", "--out", grid.to_str().unwrap(), "--svg", svg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&grid).lines().count(), 30 * 30 + 1);
    assert!(read(&svg).starts_with("<svg"));

    let out = bin().args(common).args(["--fp-samples", "2000", "fp-rate"]).output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let fp = v["fp_rate"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&fp));
}
