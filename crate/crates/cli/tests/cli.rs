use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colombeau")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

#[test]
fn classify_delta_is_moderate_of_order_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["classify", "--expr", "(iota 0 1 \"delta\")"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = json(&o.stdout);
    assert_eq!(doc["verdict"], "yes");
    assert_eq!(doc["order"], 1);
    let csv = std::fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    assert!(csv.starts_with("eps,sup_d0\n"));
    assert_eq!(csv.lines().count(), 25);
}

#[test]
fn classify_zero_is_negligible() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["classify", "--expr", "0", "--mode", "negligible", "--m-max", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o.stdout)["verdict"], "yes");
}

#[test]
fn classify_heaviside_square_minus_heaviside_is_not_negligible() {
    let dir = tempfile::tempdir().unwrap();
    let e = "(- (^ (iota 0 1 \"heaviside\") 2) (iota 0 1 \"heaviside\"))";
    let o = run(dir.path(), &["classify", "--expr", e, "--mode", "negligible"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o.stdout)["verdict"], "no");
}

#[test]
fn parse_errors_exit_64_with_an_error_document() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["classify", "--expr", "(+ x"]);
    assert_eq!(o.status.code(), Some(64));
    let doc = json(&o.stderr);
    assert_eq!(doc["error"]["kind"], "parse");
    assert_eq!(doc["error"]["exit_code"], 64);
    let o = run(dir.path(), &["classify"]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(json(&o.stderr)["error"]["kind"], "usage");
}

#[test]
fn computation_errors_exit_70() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("m.txt");
    std::fs::write(&metric, "coords x y\nchart -1:1, -1:1\ng 0 0 = (* x x)\ng 1 1 = 1\n").unwrap();
    let o = run(dir.path(), &["geodesic", "--metric", metric.to_str().unwrap(), "--start", "0.5,0", "--velocity", "0,1"]);
    assert_eq!(o.status.code(), Some(70));
    assert_eq!(json(&o.stderr)["error"]["kind"], "metric");
}

fn pair_limit(dir: &Path, expr: &str, test: &str) -> (Value, String) {
    let o = run(dir, &["pair", "--expr", expr, "--test", test]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&o.stdout);
    (doc["members"][0].clone(), std::fs::read_to_string(dir.join("pair.csv")).unwrap())
}

#[test]
fn pairing_examples() {
    let dir = tempfile::tempdir().unwrap();
    // σ(f): the pairing column is constant
    let (m, csv) = pair_limit(dir.path(), "(sin x)", "0.2,0.7,0.3");
    let col: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert!(col.iter().all(|c| *c == col[0]), "{col:?}");
    assert_eq!(m["converged"], true);
    // x·ι(δ) → 0
    let (m, _) = pair_limit(dir.path(), "(* x (iota 0 1 \"delta\"))", "0.1,0.8,0.4");
    assert!(m["limit"].as_f64().unwrap().abs() < 1e-6);
    // ι(δ) → φ(0)
    let (m, _) = pair_limit(dir.path(), "(iota 0 1 \"delta\")", "0,1");
    let phi0 = (-1.0f64).exp();
    assert!((m["limit"].as_f64().unwrap() - phi0).abs() < 1e-6);
}

#[test]
fn associate_reports_verdicts_through_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["associate", "--u", "(^ (iota 0 1 \"heaviside\") 3)", "--v", "(iota 0 1 \"heaviside\")"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(dir.path(), &["associate", "--u", "(iota 0 1 \"delta\")", "--v", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o.stdout)["verdict"], "no");
}

#[test]
fn embed_writes_values_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["embed", "--dist", "heaviside", "--points", "-0.5,0,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("embed.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24 * 3);
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[2], "1.000000000000000e0");
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "count = 10\nmollifier_q = 2\n").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "embed", "--dist", "delta"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("embed.csv")).unwrap().lines().count(), 11);
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "--grid", "0.5,0.5,8", "embed", "--dist", "delta"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("embed.csv")).unwrap().lines().count(), 9);
    std::fs::write(&cfg, "count = many\n").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "embed", "--dist", "delta"]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(json(&o.stderr)["error"]["kind"], "config");
}

#[test]
fn flow_and_geodesic_shortcuts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["flow", "--torus", "--start", "0.3,0", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("flow.csv")).unwrap();
    assert!(csv.starts_with("eps,t,start,alpha,beta\n"));
    assert_eq!(csv.lines().count(), 1 + 24 * 5);
    let o = run(dir.path(), &["geodesic", "--ppwave", "(- (* x x) (* y y))"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = json(&o.stdout);
    assert_eq!(doc["metric"]["index"], 1);
    assert!((doc["velocity_jump"][2].as_f64().unwrap() - 1.0).abs() < 0.02);
}

#[test]
fn demos_pass_and_write_their_bundles() {
    let dir = tempfile::tempdir().unwrap();
    for (name, file) in [("pointvalue", "pointvalues.csv"), ("torus-flow", "comparison.csv"), ("schwartz-obstruction", "pairings.csv")] {
        let o = run(dir.path(), &["demo", name]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(dir.path().join(name).join(file).exists());
        assert!(String::from_utf8_lossy(&o.stdout).contains("result: PASS"));
    }
}
