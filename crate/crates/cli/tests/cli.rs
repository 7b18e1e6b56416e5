use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SUB_BINARY: &str = r#"{"pmf": {"0": "3/5", "2": "2/5"}}"#;
const BINARY: &str = r#"{"pmf": {"0": "1/2", "2": "1/2"}}"#;
const LAZY: &str = r#"{"pmf": {"0": "1/4", "1": "1/2", "2": "1/4"}}"#;
const HEAVY: &str = r#"{"pmf": {"0": 0.5}, "tail": {"type": "power", "exponent": 3.0, "from": 1}}"#;

fn gwlimits(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwlimits"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn law_file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_ok(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}, stderr {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_of(out: &Output, code: i32) -> Value {
    assert_eq!(out.status.code(), Some(code), "stderr {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn classify_sub_binary() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", SUB_BINARY);
    let v = json_ok(&gwlimits(&["classify", s(&law), "--set", "N"]));
    assert_eq!(v["verdict"], "generic");
    let theta = v["theta_c"].as_f64().unwrap();
    assert!((theta - 1.5f64.sqrt()).abs() < 1e-10);
}

#[test]
fn tilt_at_one_echoes_and_feeds_classify() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", SUB_BINARY);
    let v = json_ok(&gwlimits(&["tilt", s(&law), "--set", "0,2", "--theta", "1"]));
    assert_eq!(v["pmf"]["0"], "3/5");
    assert_eq!(v["pmf"]["2"], "2/5");
    assert_eq!(v["normalizer"], "1");

    let v = json_ok(&gwlimits(&["tilt", s(&law), "--set", "N", "--theta", "6/5"]));
    let tilted = law_file(&dir, "tilted.json", &v.to_string());
    let c = json_ok(&gwlimits(&["classify", s(&tilted), "--set", "N"]));
    assert_eq!(c["verdict"], "generic");
}

#[test]
fn tilt_outside_the_domain_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", SUB_BINARY);
    // For A = {0} the tilt needs θ p(2) ≤ 1.
    let e = error_of(&gwlimits(&["tilt", s(&law), "--set", "0", "--theta", "3"]), 2);
    assert_eq!(e["error"], "theta_outside_domain");
}

#[test]
fn dwass_values_and_lattice() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", BINARY);
    let v = json_ok(&gwlimits(&["dwass", s(&law), "--k", "1", "--n", "3"]));
    assert_eq!(v, "1/8");
    let e = error_of(&gwlimits(&["dwass", s(&law), "--k", "1", "--n", "4"]), 2);
    assert_eq!(e["error"], "off_lattice");
}

#[test]
fn walk_diagnostics() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", BINARY);
    let v = json_ok(&gwlimits(&["bnl", s(&law), "--set", "2", "--n", "8", "--ell", "0"]));
    assert_eq!(v["value"], "1");
    assert_eq!(v["limit"], "1");
    let v = json_ok(&gwlimits(&["delta", s(&law), "--order", "1", "--n", "10", "--k", "0", "--ell", "0"]));
    assert_eq!(v["limit"], "1");
    assert!(v["value"].is_string());
    let lazy = law_file(&dir, "lazy.json", LAZY);
    let v = json_ok(&gwlimits(&["srlp", s(&lazy), "--n", "10", "--m", "1", "--k", "1"]));
    assert_eq!(v, "20/19");
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", SUB_BINARY);
    assert_eq!(error_of(&gwlimits(&["nonsense"]), 1)["error"], "usage");
    assert_eq!(error_of(&gwlimits(&["classify", s(&law), "--set", "x"]), 1)["error"], "usage");
    let missing = dir.path().join("missing.json");
    assert_eq!(error_of(&gwlimits(&["classify", s(&missing), "--set", "N"]), 1)["error"], "usage");
    let bad = law_file(&dir, "bad.json", r#"{"pmf": {"0": "1/2"}}"#);
    assert_eq!(error_of(&gwlimits(&["classify", s(&bad), "--set", "N"]), 1)["error"], "invalid_law");
    assert!(gwlimits(&["--help"]).status.success());
}

#[test]
fn projections() {
    let v = json_ok(&gwlimits(&["project", "tA", "--tree", "(()()())", "--set", "0"]));
    assert_eq!(v["tree"], "(()())");
    assert_eq!(v["phi"].as_array().unwrap().len(), 3);
    let v = json_ok(&gwlimits(&["project", "forest", "--tree", "((()())())", "--set", "2"]));
    assert_eq!(v["forest"], serde_json::json!(["(())"]));
    let e = error_of(&gwlimits(&["project", "forest", "--tree", "(())", "--set", "0"]), 1);
    assert_eq!(e["error"], "invalid_set");
}

#[test]
fn samples_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", SUB_BINARY);
    for kind in ["gw", "kesten", "condense"] {
        let args = ["sample", kind, s(&law), "--seed", "17", "--count", "20", "--window", "3"];
        let a = gwlimits(&args);
        let b = gwlimits(&args);
        assert!(a.status.success(), "{kind}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{kind}");
        let v: Value = serde_json::from_slice(&a.stdout).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 20);
    }
    let one = Command::new(env!("CARGO_BIN_EXE_gwlimits"))
        .args(["sample", "gw", s(&law), "--seed", "3", "--count", "50"])
        .env("GWLIMITS_NUM_THREADS", "1")
        .output()
        .unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_gwlimits"))
        .args(["sample", "gw", s(&law), "--seed", "3", "--count", "50"])
        .env("GWLIMITS_NUM_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn conditioned_samples_meet_the_condition() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", BINARY);
    let v = json_ok(&gwlimits(&[
        "sample", "conditioned", s(&law), "--set", "0", "--n", "4", "--count", "10", "--seed", "2",
    ]));
    for t in v.as_array().unwrap() {
        assert_eq!(t["l_a"], 4);
        assert_eq!(t["size"], 7);
    }
    let out = gwlimits(&["sample", "condense", s(&law), "--format", "paren", "--count", "3"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    error_of(&gwlimits(&["sample", "conditioned", s(&law), "--n", "4"]), 1);
}

#[test]
fn probe_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", BINARY);
    let events = law_file(&dir, "events.txt", "# leaf graft\n(()())|1|0\n\n()||0\n");
    let csv = dir.path().join("out.csv");
    let v = json_ok(&gwlimits(&[
        "probe", s(&law), "--set", "N", "--events", s(&events), "--grid", "5,9,17", "--out", s(&csv), "--seed", "1",
    ]));
    assert_eq!(v["manifest"]["set"], "N");
    assert_eq!(v["manifest"]["grid"], serde_json::json!([5, 9, 17]));
    assert_eq!(v["manifest"]["seed"], 1);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,event,conditional,limit,gap"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0], "5,\"(()())|1|0\",1/2,1/4,1/4");
    assert!(rows[3..].iter().all(|r| r.ends_with(",1,1,0")));
}

#[test]
fn probe_on_a_float_law() {
    let dir = TempDir::new().unwrap();
    let law = law_file(&dir, "p.json", HEAVY);
    let events = law_file(&dir, "events.txt", "()||3\n");
    let out = gwlimits(&["probe", s(&law), "--set", "N", "--events", s(&events), "--grid", "16,32"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let gaps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 2);
    assert!(gaps[1] < gaps[0]);
}
