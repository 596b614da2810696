use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn geoharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoharm"))
        .args(args)
        .env_remove("GEO_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect()
}

fn manifest(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut it = text.lines();
    let header = it.next().unwrap().split(',').map(String::from).collect();
    let rows = it
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn verify_default_run_passes() {
    let out = geoharm(&["verify-paper"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 25);
    for c in checks {
        assert!(!c["anchor"].as_str().unwrap().is_empty());
        assert_eq!(c["pass"], Value::Bool(true));
        assert!(c["max_residual"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap());
    }
    assert_eq!(report["summary"]["failed"], 0);
    assert_eq!(report["tool"], "geoharm");
}

#[test]
fn verify_tight_tolerance_fails_and_names_checks() {
    let out = geoharm(&["verify-paper", "--tol", "1e-15"]);
    assert_eq!(code(&out), 1);
    let report = stdout_json(&out);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == Value::Bool(false))
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"geometry.christoffel_vs_fd"), "{failed:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.christoffel_vs_fd"));
}

#[test]
fn verify_is_deterministic() {
    let a = geoharm(&["verify-paper", "--seed", "7"]);
    let b = geoharm(&["verify-paper", "--seed", "7"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_geoharm"))
        .arg("verify-paper")
        .env("GEO_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(a.stdout, env.stdout);
    assert_eq!(stdout_json(&a)["seed"], 7);
}

#[test]
fn eval_worked_example() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "q.json",
        r#"{"model": "euclidean(2)", "f": "0.1*(x1^2+x2^2)", "points": [[1, 1]]}"#,
    );
    let out = geoharm(&["eval", "--manifest", p(&m), "--quantity", "residual_d"]);
    assert_eq!(code(&out), 0);
    let rec = &lines(&out)[0];
    assert!((rec["value"].as_f64().unwrap() - 0.384).abs() < 1e-12);
    assert!((rec["s"].as_f64().unwrap() - 0.08).abs() < 1e-12);
    assert_eq!(rec["quantity"], "residual_d");

    let out = geoharm(&["eval", "--manifest", p(&m), "--quantity", "trace_chi"]);
    assert!((lines(&out)[0]["value"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn eval_named_field_on_hyperbolic_plane() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "h.json",
        r#"{"dimension": 2, "model": "hyperbolic(2)",
            "field": {"name": "hyperbolic_horizontal", "params": {"b": 0.2}},
            "points": [[1, 2]]}"#,
    );
    let out = geoharm(&["eval", "--manifest", p(&m), "--quantity", "tension_d"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = lines(&out)[0]["value"].clone();
    assert!(v
        .as_array()
        .unwrap()
        .iter()
        .all(|x| x.as_f64().unwrap().abs() < 1e-12));
}

#[test]
fn eval_point_override_and_custom_metric() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "c.json",
        r#"{"coordinates": ["u", "v"], "metric": [["1/v^2"], ["0", "1/v^2"]], "f": "0.2*u"}"#,
    );
    let out = geoharm(&[
        "eval",
        "--manifest",
        p(&m),
        "--quantity",
        "hess",
        "--point",
        "1,2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let h = &lines(&out)[0]["value"];
    assert!((h[0][1].as_f64().unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn eval_exit_codes() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "v.json",
        r#"{"model": "euclidean(2)", "f": "0.1*(x1^2+x2^2)"}"#,
    );
    let out = geoharm(&[
        "eval",
        "--manifest",
        p(&m),
        "--quantity",
        "s",
        "--point",
        "5,5",
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[5.0, 5.0]"));

    let bad = manifest(
        &dir,
        "bad.json",
        r#"{"model": "euclidean(2)", "f": "0.1*(x1^^2)"}"#,
    );
    let out = geoharm(&[
        "eval",
        "--manifest",
        p(&bad),
        "--quantity",
        "s",
        "--point",
        "1,1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset 8"));

    let broken = manifest(
        &dir,
        "broken.json",
        "{\"model\": \"euclidean(2)\",\n \"f\": 3}",
    );
    let out = geoharm(&[
        "eval",
        "--manifest",
        p(&broken),
        "--quantity",
        "s",
        "--point",
        "1,1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let both = manifest(
        &dir,
        "both.json",
        r#"{"model": "euclidean(2)", "metric": [["1"], ["0", "1"]], "f": "x1"}"#,
    );
    let out = geoharm(&[
        "eval",
        "--manifest",
        p(&both),
        "--quantity",
        "s",
        "--point",
        "1,1",
    ]);
    assert_eq!(code(&out), 2);

    let out = geoharm(&["eval", "--manifest", p(&m), "--quantity", "s"]);
    assert_eq!(code(&out), 2, "no points");
}

#[test]
fn check_affine_field_is_exact() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "a.json",
        r#"{"model": "euclidean(2)", "f": "0.6*x1"}"#,
    );
    let out = geoharm(&[
        "check",
        "--manifest",
        p(&m),
        "--samples",
        "100",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    for c in report["checks"].as_array().unwrap() {
        assert!(c["max_residual"].as_f64().unwrap() <= 1e-12, "{c}");
        assert!(c["points"].as_u64().unwrap() >= 100);
    }
}

#[test]
fn check_cubic_on_hyperbolic_plane() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "h.json",
        r#"{"model": "hyperbolic(2)",
            "f": "0.025*(x1^3 - x1*x2^2) + 0.05*x1*x2 + 0.01*x2^3",
            "domain": {"box": [[-1, 1], [0.5, 2]]},
            "tolerances": {"check": 1e-8}}"#,
    );
    let out = geoharm(&[
        "check",
        "--manifest",
        p(&m),
        "--samples",
        "50",
        "--seed",
        "11",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = stdout_json(&out);
    let b = stdout_json(&geoharm(&[
        "check",
        "--manifest",
        p(&m),
        "--samples",
        "50",
        "--seed",
        "11",
    ]));
    assert_eq!(a, b);
}

#[test]
fn check_reports_validity_witness() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "s.json",
        r#"{"model": "euclidean(2)", "f": "0.8*x1^2"}"#,
    );
    let out = geoharm(&[
        "check",
        "--manifest",
        p(&m),
        "--samples",
        "20",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("witness"));
}

#[test]
fn solve_bilinear_data_exactly() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "u.json",
        r#"{"model": "euclidean(2)", "f": "0", "domain": {"box": [[0, 1], [0, 1]]}}"#,
    );
    let csv = dir.path().join("out.csv");
    let out = geoharm(&[
        "solve",
        "--manifest",
        p(&m),
        "--grid",
        "33x33",
        "--bc",
        "x1*x2",
        "--mode",
        "base",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert!(summary["final_residual"].as_f64().unwrap() <= 1e-8);
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["x1", "x2", "f", "s", "residual"]);
    assert_eq!(rows.len(), 33 * 33);
    for r in &rows {
        assert!((r[2] - r[0] * r[1]).abs() <= 1e-8);
        assert!(r[4].abs() <= 1e-8);
    }
}

#[test]
fn solve_deformed_affine_fixed_point() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "u.json",
        r#"{"model": "euclidean(2)", "f": "0.6*x1", "domain": {"box": [[0, 1], [0, 1]]}}"#,
    );
    let csv = dir.path().join("out.csv");
    let out = geoharm(&[
        "solve",
        "--manifest",
        p(&m),
        "--grid",
        "17x17",
        "--mode",
        "deformed",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["picard_iterations"], 1);
    assert!((summary["max_s"].as_f64().unwrap() - 0.36).abs() < 1e-9);
}

#[test]
fn solve_hyperbolic_vertical_family() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "h.json",
        r#"{"model": "hyperbolic(2)", "f": "0.1*x2", "domain": {"box": [[0, 1], [1, 2]]}}"#,
    );
    let csv = dir.path().join("out.csv");
    let out = geoharm(&[
        "solve",
        "--manifest",
        p(&m),
        "--grid",
        "17x17",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&csv);
    let err = rows
        .iter()
        .map(|r| (r[2] - 0.1 * r[1]).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn solve_non_convergence_exits_4_with_summary() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "u.json",
        r#"{"model": "euclidean(2)", "f": "0", "domain": {"box": [[0, 1], [0, 1]]}, "tolerances": {"max_sweeps": 3}}"#,
    );
    let csv = dir.path().join("out.csv");
    let out = geoharm(&[
        "solve",
        "--manifest",
        p(&m),
        "--grid",
        "33x33",
        "--bc",
        "x1^2-x2^2",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 4);
    assert_eq!(stdout_json(&out)["converged"], Value::Bool(false));
}

#[test]
fn solve_needs_two_dimensions() {
    let dir = TempDir::new().unwrap();
    let m = manifest(
        &dir,
        "e3.json",
        r#"{"model": "euclidean(3)", "f": "x1", "domain": {"box": [[0, 1], [0, 1], [0, 1]]}}"#,
    );
    let out = geoharm(&[
        "solve",
        "--manifest",
        p(&m),
        "--out",
        p(&dir.path().join("x.csv")),
    ]);
    assert_eq!(code(&out), 2);
}
