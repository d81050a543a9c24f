use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "job_id,task_index,arrival_time,cpu_time\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispatchsim"))
        .current_dir(dir)
        .env_remove("DISPATCHSIM_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn thousand_jobs(dir: &Path) {
    let mut s = String::from(HEADER);
    for i in 1..=1000 {
        s += &format!("j{i},0,{},{}\n", i as f64 * 0.5, i);
    }
    write(dir, "y.csv", &s);
}

#[test]
fn model_single_server_value() {
    let d = TempDir::new().unwrap();
    write(d.path(), "m.toml", "[model]\nlambda = 1.0\nc_a = 1.0\nmean_y = 8.0\nc_y = 1.0\nn_list = [1]\npolicies = [\"LWL\"]\n");
    let o = run(d.path(), &["model", "-c", "m.toml"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let cols: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!((cols[7].parse::<f64>().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn simulate_two_jobs_lwl() {
    let d = TempDir::new().unwrap();
    write(d.path(), "t.csv", &format!("{HEADER}a,0,0,5\nb,0,1,5\n"));
    write(d.path(), "s.toml", "[simulate]\nn = 2\nmu = 1.0\npolicy = \"LWL\"\n");
    let o = run(d.path(), &["simulate", "-c", "s.toml", "--trace", "t.csv", "-o", "r.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["metrics"]["mean_response"], 5.0);
    assert_eq!(fs::read_to_string(d.path().join("r.csv")).unwrap().lines().count(), 3);
}

#[test]
fn transform_is_deterministic_and_strips() {
    let d = TempDir::new().unwrap();
    thousand_jobs(d.path());
    let args = ["transform", "y.csv", "--shuffle-iat", "--strip-outliers", "0.999", "--seed", "7"];
    assert!(run(d.path(), &[&args[..], &["-o", "a.csv"]].concat()).status.success());
    assert!(run(d.path(), &[&args[..], &["-o", "b.csv"]].concat()).status.success());
    let a = fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 999);
}

#[test]
fn transform_without_flags_copies_bytes() {
    let d = TempDir::new().unwrap();
    write(d.path(), "t.csv", &format!("{HEADER}a,0,0.50,5\nb,0,1,5.0\n"));
    assert!(run(d.path(), &["transform", "t.csv", "-o", "c.csv"]).status.success());
    assert_eq!(fs::read(d.path().join("t.csv")).unwrap(), fs::read(d.path().join("c.csv")).unwrap());
}

#[test]
fn job_shuffle_needs_job_level() {
    let d = TempDir::new().unwrap();
    write(d.path(), "t.csv", &format!("{HEADER}a,0,0,5\na,1,0,2\nb,0,1,5\n"));
    let o = run(d.path(), &["transform", "t.csv", "--shuffle-cpu", "job", "-o", "c.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(d.path(), &["transform", "t.csv", "--job-level", "--shuffle-cpu", "job", "-o", "c.csv"]);
    assert!(o.status.success());
}

#[test]
fn missing_trace_fails_quietly() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["analyze", "nope.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn analyze_reports_counts() {
    let d = TempDir::new().unwrap();
    thousand_jobs(d.path());
    let o = run(d.path(), &["analyze", "y.csv", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["moments"]["n_jobs"], 1000);
    assert_eq!(v["single_task_fraction"], 1.0);
}

#[test]
fn tune_single_cell() {
    let d = TempDir::new().unwrap();
    thousand_jobs(d.path());
    write(
        d.path(),
        "t.toml",
        "[tune]\nn_total = 10\nrho0 = 0.5\ntheta_quantiles = [0.99]\nn1_grid = [9]\n",
    );
    let o = run(d.path(), &["tune", "-c", "t.toml", "--trace", "y.csv", "-o", "g.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(v["best"]["n1"], 9);
    assert_eq!(v["best"]["n2"], 1);
    assert_eq!(v["best"]["theta_quantile"], 0.99);
    assert_eq!(v["grid"].as_array().unwrap().len(), 1);
}

#[test]
fn config_errors_exit_two() {
    let d = TempDir::new().unwrap();
    write(d.path(), "bad.toml", "[sweep]\nn_lst = [2]\n");
    let o = run(d.path(), &["sweep", "-c", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn sweep_is_byte_reproducible() {
    let d = TempDir::new().unwrap();
    write(
        d.path(),
        "s.toml",
        "[trace]\npreset = \"markovian\"\nrate = 1.0\nmean_demand = 1.0\nduration = 2000\nseed = 5\n[sweep]\nn_list = [1, 4]\nseeds = [1, 2]\n",
    );
    for name in ["a.csv", "b.csv"] {
        assert!(run(d.path(), &["sweep", "-c", "s.toml", "-o", name, "--jobs", "2"]).status.success());
    }
    assert_eq!(fs::read(d.path().join("a.csv")).unwrap(), fs::read(d.path().join("b.csv")).unwrap());
    assert_eq!(fs::read(d.path().join("a.json")).unwrap(), fs::read(d.path().join("b.json")).unwrap());
}

#[test]
fn unstable_budget_exits_four() {
    let d = TempDir::new().unwrap();
    thousand_jobs(d.path());
    write(d.path(), "s.toml", "[sweep]\nn_list = [2]\nrho0 = 1.5\n");
    let o = run(d.path(), &["sweep", "-c", "s.toml", "--trace", "y.csv", "-o", "x.csv"]);
    assert_eq!(o.status.code(), Some(4));
}
