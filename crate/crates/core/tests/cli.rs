use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_qtazrp");

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn rates(&self, name: &str, json: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, json).unwrap();
        p
    }

    fn unit(&self) -> PathBuf {
        self.rates("unit.json", r#"{"q": 0.5, "default_a": 1.0}"#)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_with(args: &[&str], rates: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.push("--rates");
    all.push(rates.to_str().unwrap());
    run(&all)
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad JSON line {l:?}: {e}")))
        .collect()
}

fn value(out: &Output) -> f64 {
    let r = records(out);
    assert_eq!(r.len(), 1, "{r:?}");
    r[0]["value"].as_f64().unwrap()
}

#[test]
fn prob_single_site_stays() {
    let f = Fixture::new();
    let out = run_with(&["prob", "--from", "0", "--to", "0", "--t", "0.5"], &f.unit());
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    for key in ["method", "from", "to", "t", "value", "error", "converged", "nodes", "radius", "seed"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["method"], "bethe");
    assert_eq!(r["converged"], true);
    assert!((r["value"].as_f64().unwrap() - 0.778_800_783_1).abs() < 1e-10);
}

#[test]
fn prob_trivial_cases() {
    let f = Fixture::new();
    let rates = f.unit();
    let out = run_with(&["prob", "--from", "0,0", "--to", "0,0", "--t", "0"], &rates);
    assert!((value(&out) - 1.0).abs() < 1e-10);
    let out = run_with(&["prob", "--from", "1,0", "--to", "0,0", "--t", "0.5"], &rates);
    assert_eq!(out.status.code(), Some(0));
    assert!(value(&out).abs() < 1e-10);
    let out = run_with(&["prob", "--from=-1,-2", "--to", "0,-1", "--t", "0.5"], &rates);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let f = Fixture::new();
    let rates = f.unit();
    for args in [
        &["prob", "--from", "1,x", "--to", "1,0", "--t", "1"][..],
        &["prob", "--from", "0,1", "--to", "1,1", "--t", "1"],
        &["prob", "--from", "0", "--to", "1,0", "--t", "1"],
        &["prob", "--from", "0", "--to", "1", "--t", "-1"],
    ] {
        let out = run_with(args, &rates);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty());
    }
    let bad = f.rates("bad.json", r#"{"q": 1.5, "default_a": 1.0}"#);
    assert_eq!(run_with(&["prob", "--from", "0", "--to", "0", "--t", "1"], &bad).status.code(), Some(1));
    let missing = f.dir.path().join("nope.json");
    assert_eq!(run_with(&["prob", "--from", "0", "--to", "0", "--t", "1"], &missing).status.code(), Some(1));
    assert_eq!(run(&["prob", "--from", "0"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn non_convergence_exits_two_with_record() {
    let f = Fixture::new();
    let rates = f.rates("q9.json", r#"{"q": 0.9, "default_a": 1.0}"#);
    let out = run_with(
        &["prob", "--from", "0,0", "--to", "1,0", "--t", "0.5", "--nodes", "8", "--max-nodes", "8"],
        &rates,
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(records(&out)[0]["converged"], false);
    let out = run_with(&["prob", "--from", "0", "--to", "1", "--t", "1000"], &rates);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
}

#[test]
fn step_prob_examples() {
    let f = Fixture::new();
    let rates = f.rates("inh.json", r#"{"q": 0.5, "default_a": 1.0, "overrides": {"0": 1.5, "1": 0.7, "2": 1.2}}"#);
    let out = run_with(&["step-prob", "--to", "0,0,0", "--t", "0"], &rates);
    assert!((value(&out) - 1.0).abs() < 1e-10);
    let out = run_with(&["step-prob", "--to", "1,0", "--t", "0.5", "--cross-check"], &rates);
    let r = &records(&out)[0];
    assert!(r["delta"].as_f64().unwrap() < 1e-8);
    let step = value(&run_with(&["step-prob", "--to", "2,1,0", "--t", "1"], &rates));
    let oracle = value(&run_with(&["oracle", "--from", "0,0,0", "--to", "2,1,0", "--t", "1"], &rates));
    assert!((step - oracle).abs() < 1e-6);
}

#[test]
fn oracle_one_particle_matches_closed_form() {
    let f = Fixture::new();
    let rates = f.rates("one.json", r#"{"q": 0.3, "default_a": 1.0, "overrides": {"0": 0.8, "1": 1.9}}"#);
    let out = run_with(&["oracle", "--from", "0", "--to", "1", "--t", "1.1", "--eps", "1e-12"], &rates);
    assert_eq!(records(&out)[0]["method"], "oracle");
    let (b0, b1, t) = (0.8f64 * 0.7, 1.9f64 * 0.7, 1.1f64);
    let want = b0 / (b1 - b0) * ((-b0 * t).exp() - (-b1 * t).exp());
    assert!((value(&out) - want).abs() < 1e-12);
}

#[test]
fn oracle_state_cap_exits_three() {
    let f = Fixture::new();
    let out = run_with(&["oracle", "--from", "0,0,0,0,0,0", "--to", "1,0,0,0,0,0", "--t", "30"], &f.unit());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic() {
    let f = Fixture::new();
    let rates = f.unit();
    let args = ["simulate", "--from", "1,0", "--t", "2", "--trials", "1", "--seed", "42"];
    let a = run_with(&args, &rates);
    let b = run_with(&args, &rates);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r = records(&a);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0]["value"], 1.0);
    assert_eq!(r[0]["method"], "mc");
    assert_eq!(r[0]["seed"], 42);
}

#[test]
fn simulate_targets_and_threads() {
    let f = Fixture::new();
    let rates = f.unit();
    let args = ["simulate", "--from", "0,0", "--t", "1", "--trials", "4000", "--seed", "9", "--targets", "1,0;1,1", "--targets", "2,0"];
    let out = run_with(&args, &rates);
    let r = records(&out);
    assert_eq!(r.len(), 3);
    let mut single: Vec<&str> = vec!["--threads", "1"];
    single.extend_from_slice(&args);
    let one = run_with(&single, &rates);
    let values = |o: &Output| records(o).iter().map(|r| r["value"].as_f64().unwrap()).collect::<Vec<_>>();
    assert_eq!(values(&out), values(&one));
}

#[test]
fn echo_reproduces_output() {
    let f = Fixture::new();
    let rates = f.unit();
    let out = run_with(&["prob", "--from", "1,0", "--to", "2,1", "--t", "0.7"], &rates);
    let echo: Vec<String> = records(&out)[0]["echo"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let again = Command::new(BIN).args(&echo).output().unwrap();
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn csv_export() {
    let f = Fixture::new();
    let out = run_with(&["--csv", "prob", "--from", "0", "--to", "1", "--t", "0.5"], &f.unit());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,from,to,t,value,error,converged,nodes,radius,seed,echo"
    );
    assert!(lines.next().unwrap().starts_with("bethe,0,1,0.5,"));
    assert!(lines.next().is_none());
}

#[test]
fn verify_suites_pass() {
    let out = run(&["verify", "--suite", "identities", "--n-max", "5", "--points", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let r = records(&out);
    assert!(r.iter().all(|c| c["passed"] == true && c["value"].as_f64().unwrap() < 1e-10));
    let out = run(&["verify", "--suite", "residuals", "--n-max", "3", "--cases", "3", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(records(&out).iter().all(|c| c["value"].as_f64().unwrap() < 1e-6));
    let out = run(&["verify", "--suite", "oracle-match"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(records(&out).len(), 55);
}
