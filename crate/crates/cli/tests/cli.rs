use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn splitpop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitpop")).args(args).env_remove("SPLITPOP_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const MCKENDRICK: &str = r#"{
    "model": {"name": "mckendrick"},
    "solver": {"final_time": 10.0, "steps": 100, "mass_update": "boundary_ode", "snapshot_times": [0, 5, 10]},
    "reconstruction": {"initial": {"kind": "fixed_location", "target": 10, "domain": {"fixed_interval": [0, 1]}}},
    "experiment": {"levels": 3, "error_metric": "rho_doubled_mass_gap", "output_dir": "out"}
}"#;

const SELECTION: &str = r#"{
    "model": {"name": "selection_growth", "A": 1.0},
    "solver": {"final_time": 2.0, "steps": 20},
    "reconstruction": {"initial": {"kind": "fixed_location", "target": 20, "domain": {"fixed_interval": [-2, 2]}}}
}"#;

#[test]
fn simulate_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", MCKENDRICK);
    let out = splitpop(&["simulate", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("atoms = 110"));
    for f in ["snapshot_0000.csv", "snapshot_0002.csv", "final.csv", "snapshots.csv", "diagnostics.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn converge_prints_orders_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", MCKENDRICK);
    let other = dir.path().join("elsewhere");
    let out = splitpop(&["converge", &cfg, "--out", other.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("1.253231e-2"), "{text}");
    assert_eq!(text.lines().count(), 4);
    let csv = fs::read_to_string(other.join("error_report.csv")).unwrap();
    assert!(csv.starts_with("level,dt,dx,err,q,rho,mass,atoms,runtime_s\n0,0.1,0.1,"));
}

#[test]
fn sweep_exports_triples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SELECTION);
    let out_dir = dir.path().join("sweep");
    let out = splitpop(&["sweep", &cfg, "--param", "A", "--from", "0", "--to", "3", "--points", "4", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 20);
    assert_eq!(fs::read_to_string(out_dir.join("failures.csv")).unwrap(), "A,error\n");
}

#[test]
fn sweep_records_bad_points_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SELECTION);
    let out = splitpop(&["sweep", &cfg, "--param", "A", "--from", "2", "--to", "4", "--points", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("A = 4: failed"));
    let out = splitpop(&["sweep", &cfg, "--param", "A", "--from", "5", "--to", "6", "--points", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = splitpop(&["sweep", &cfg, "--param", "epsilon", "--from", "0", "--to", "1", "--points", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metrics_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x,m\n0,1\n");
    let b = write(dir.path(), "b.csv", "x,m\n0.5,2\n");
    let out = splitpop(&["metrics", &a, &b]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["w1_normalized"], 0.5);
    assert_eq!(v["mass_gap"], 1.0);
    assert_eq!(v["rho"], 1.5);
    let u = write(dir.path(), "u.csv", "x,F\n0,0\n1,1\n");
    assert!(splitpop(&["metrics", &a, &u]).status.success());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "t.json", &SELECTION.replace("\"steps\"", "\"stepz\""));
    assert_eq!(splitpop(&["simulate", &typo]).status.code(), Some(2));
    assert_eq!(splitpop(&["simulate", "/nonexistent/c.json"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.csv", "x,y\n0,1\n");
    assert_eq!(splitpop(&["metrics", &bad, &bad]).status.code(), Some(2));
    assert_eq!(splitpop(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let unstable = write(dir.path(), "u.json", &SELECTION.replace("\"steps\": 20", "\"steps\": 1"));
    let out = splitpop(&["simulate", &unstable]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SELECTION);
    let run = |threads: &str| Command::new(env!("CARGO_BIN_EXE_splitpop")).args(["simulate", &cfg]).env("SPLITPOP_THREADS", threads).output().unwrap();
    assert!(run("2").status.success());
    assert_eq!(run("many").status.code(), Some(2));
}

#[test]
fn help_documents_the_config_defaults() {
    let out = splitpop(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"rk4\" (default)") && text.contains("SPLITPOP_THREADS"), "{text}");
}
