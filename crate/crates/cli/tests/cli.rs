use std::path::Path;
use std::process::{Command, Output};

fn erm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erm")).args(args).env_remove("ERM_BACKEND").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_curve(dir: &Path, knots: &str, values: &str) -> String {
    let p = dir.join("curve.json");
    std::fs::write(&p, format!(r#"{{"knots":{knots},"values":{values}}}"#)).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn eval_affine_json() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write_curve(dir.path(), "[0,1]", "[1,0]");
    let out = erm(&["eval", "--curve", &curve]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["lower"].as_f64().unwrap() <= 2.0 / 3.0 && 2.0 / 3.0 <= v["upper"].as_f64().unwrap());
    assert_eq!(v["converged"], true);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write_curve(dir.path(), "[0,1]", "[1,0]");
    assert_eq!(code(&erm(&[])), 1);
    assert_eq!(code(&erm(&["--help"])), 0);
    assert_eq!(code(&erm(&["eval", "--curve", &curve, "--tol", "0"])), 1);
    assert_eq!(code(&erm(&["eval", "--curve", "/nonexistent/curve.json"])), 1);
    assert_eq!(code(&erm(&["mc", "--curve", &curve, "--samples", "10"])), 1);
    assert_eq!(code(&erm(&["grid", "--q-opt", "1.5"])), 1);
    let bad = write_curve(dir.path(), "[0,0.5,1]", "[0.5,0,1]");
    assert_eq!(code(&erm(&["eval", "--curve", &bad])), 1);
    let out = dir.path().join("run");
    assert_eq!(code(&erm(&["upper", "--n", "2", "--backend", "no-such-backend", "--out", path(&out)])), 1);
}

#[test]
fn mc_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write_curve(dir.path(), "[0,1]", "[1,0]");
    let a = erm(&["mc", "--curve", &curve, "--samples", "1000", "--seed", "3"]);
    let b = erm(&["mc", "--curve", &curve, "--samples", "1000", "--seed", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("upper");
    let out = erm(&["upper", "--n", "3", "--backend", "reference", "--out", path(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "records.jsonl", "summary.json", "timings.jsonl", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let records = std::fs::read(run.join("records.jsonl")).unwrap();

    assert_eq!(code(&erm(&["report", path(&run)])), 0);
    let plot = erm(&["report", path(&run), "--plot-data"]);
    let text = String::from_utf8(plot.stdout).unwrap();
    assert!(text.starts_with("q_opt_midpoint,model_value,certified_or_exact\n"));
    assert_eq!(text.lines().count(), 1 + 4);

    // resuming a complete run reproduces the same records
    assert_eq!(code(&erm(&["upper", "--n", "3", "--backend", "reference", "--out", path(&run)])), 0);
    assert_eq!(std::fs::read(run.join("records.jsonl")).unwrap(), records);

    // a different configuration in the same directory is refused
    assert_ne!(code(&erm(&["upper", "--n", "3", "--gap", "0.01", "--backend", "reference", "--out", path(&run)])), 0);

    let tampered = String::from_utf8(records).unwrap().replacen("\"k\":1", "\"k\":1 ", 1);
    std::fs::write(run.join("records.jsonl"), tampered).unwrap();
    assert_eq!(code(&erm(&["report", path(&run)])), 2);
}

#[test]
fn partial_lower_range_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("lower");
    let args = ["lower", "--n", "3", "--N", "4", "--backend", "reference", "--k-max", "2", "--out", path(&run)];
    let out = erm(&args);
    assert_eq!(code(&out), 3);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["aggregate"]["certifying"], false);
    assert_eq!(code(&erm(&["report", path(&run)])), 3);
}

#[test]
fn export_writes_mps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.mps");
    assert_eq!(code(&erm(&["export", "--family", "upper", "--n", "3", "--k", "2", "--out", path(&out)])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("ROWS") && text.contains("COLUMNS") && text.trim_end().ends_with("ENDATA"));
    assert_eq!(code(&erm(&["export", "--family", "lower", "--n", "3", "--k", "2", "--out", path(&out)])), 1);
}

#[test]
fn grid_single_point_json() {
    let out = erm(&["grid", "--q-opt", "1", "--tol", "1e-4"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["min_value"].as_f64().unwrap() - 0.6511).abs() < 2e-3);
}
