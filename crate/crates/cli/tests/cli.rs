use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn asyncq(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncq"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn asyncq")
}

fn json_out(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn solve_reports_fixed_point() {
    let dir = tmp();
    let mdp = data("two_state.json");
    let v = json_out(&asyncq(&["solve", mdp.to_str().unwrap()], dir.path()));
    assert!(v["residual"].as_f64().unwrap() < 1e-9);
    let q = v["qstar"].as_array().unwrap();
    assert_eq!(q.len(), 2);
    // V(s) is the row maximum and the greedy action attains it.
    for (s, row) in q.iter().enumerate() {
        let row: Vec<f64> = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let a = v["greedy_policy"][s].as_u64().unwrap() as usize;
        assert_eq!(row[a], v["values"][s].as_f64().unwrap());
        assert!(row.iter().all(|&x| x <= row[a]));
    }
}

#[test]
fn chain_reports_exploration_constants() {
    let dir = tmp();
    let v = json_out(&asyncq(&["chain", data("two_state.json").to_str().unwrap()], dir.path()));
    let mu: Vec<f64> = v["stationary"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(mu.len(), 4);
    assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let mu_min = v["mu_min"].as_f64().unwrap();
    assert!((v["sigma"].as_f64().unwrap() - mu_min / 2.0).abs() < 1e-15);
    assert_eq!(v["irreducible"], Value::Bool(true));
    assert_eq!(v["exploration_check"]["holds"], Value::Bool(true));
}

#[test]
fn run_is_deterministic_and_rate_reads_its_trace() {
    let dir = tmp();
    let cfg = data("small_run.json");
    let cfg = cfg.to_str().unwrap();
    let a = json_out(&asyncq(&["run", cfg, "--output", "a/run"], dir.path()));
    json_out(&asyncq(&["--workers", "2", "run", cfg, "--output", "b/run"], dir.path()));
    assert_eq!(a["replications"], 3);
    for ext in ["csv", "meta.json"] {
        let x = std::fs::read(dir.path().join(format!("a/run.{ext}"))).unwrap();
        let y = std::fs::read(dir.path().join(format!("b/run.{ext}"))).unwrap();
        assert!(x == y, "run.{ext} differs between invocations");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/run.csv")).unwrap();
    assert!(csv.starts_with("replication,t,error,alpha\n"));

    // A different seed gives a different trace.
    json_out(&asyncq(&["run", cfg, "--seed", "8", "--output", "c/run"], dir.path()));
    let z = std::fs::read(dir.path().join("c/run.csv")).unwrap();
    assert_ne!(z, csv.as_bytes());

    let fit = json_out(&asyncq(&["rate", "a/run.csv"], dir.path()));
    assert!(fit["slope"].as_f64().unwrap() < 0.0);
    assert!(fit["points"].as_u64().unwrap() >= 3);
    let narrow = asyncq(&["rate", "a/run.csv", "--t-min", "10", "--t-max", "11"], dir.path());
    assert_eq!(narrow.status.code(), Some(2));
}

#[test]
fn run_defaults_to_config_stem_in_cwd() {
    let dir = tmp();
    json_out(&asyncq(&["run", data("small_run.json").to_str().unwrap()], dir.path()));
    assert!(dir.path().join("small_run.csv").is_file());
    assert!(dir.path().join("small_run.meta.json").is_file());
}

#[test]
fn sweep_writes_table_and_traces() {
    let dir = tmp();
    let cfg = data("small_sweep.json");
    let v = json_out(&asyncq(&["sweep", cfg.to_str().unwrap(), "--output", "sw"], dir.path()));
    let rows = v["table"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let compliant: Vec<bool> = rows.iter().map(|r| r["compliant"].as_bool().unwrap()).collect();
    assert_eq!(compliant, [false, true, false]);
    assert!(rows.iter().any(|r| r["ratio_to_best"].as_f64().unwrap() == 1.0));
    let table = std::fs::read(dir.path().join("sw.sweep.csv")).unwrap();
    for i in 0..3 {
        assert!(dir.path().join(format!("sw.s{i}.csv")).is_file());
        assert!(dir.path().join(format!("sw.s{i}.meta.json")).is_file());
    }
    json_out(&asyncq(&["sweep", cfg.to_str().unwrap(), "--output", "again"], dir.path()));
    assert_eq!(table, std::fs::read(dir.path().join("again.sweep.csv")).unwrap());
}

#[test]
fn bound_t1_and_t2() {
    let dir = tmp();
    let t1 = [
        "bound", "t1", "--gamma=0.9", "--sigma=0.25", "--tau=4", "--h=80", "--t0=320", "--delta=0.05",
        "--n=4", "--C=1", "--w_bar=2", "--v_min=1", "--x_bar=10", "--T=100000",
    ];
    let v = json_out(&asyncq(&t1, dir.path()));
    assert_eq!(v["bound"]["conditions_met"], Value::Bool(true));
    let value = v["bound"]["value"].as_f64().unwrap();
    assert!(value.is_finite() && value > 0.0);

    // Failing step-size conditions are reported, not rejected.
    let mut weak = t1;
    weak[5] = "--h=16";
    weak[6] = "--t0=64";
    let v = json_out(&asyncq(&weak, dir.path()));
    assert_eq!(v["bound"]["conditions_met"], Value::Bool(false));

    let t2 = [
        "bound", "t2", "--epsilon", "0.5", "--r_bar=1", "--gamma=0.9", "--mu_min=0.1", "--t_mix=4",
        "--h=200", "--t0=800", "--delta=0.05", "--n_sa=4",
    ];
    let v = json_out(&asyncq(&t2, dir.path()));
    let horizon = v["sample_complexity"]["horizon"].as_u64().unwrap();
    assert_eq!(v["inputs"]["T"].as_u64().unwrap(), horizon);
    assert!(v["bound"]["value"].as_f64().unwrap() <= 0.5);
    assert_eq!(v["tau"], 20);
}

#[test]
fn exit_codes() {
    let dir = tmp();
    let code = |args: &[&str]| asyncq(args, dir.path()).status.code();
    assert_eq!(code(&["bound", "t1", "--gamma=0.9"]), Some(2));
    assert_eq!(code(&["bound", "t1", "--gamma"]), Some(2));
    assert_eq!(code(&["solve", "missing.json"]), Some(4));
    assert_eq!(code(&["rate", "missing.csv"]), Some(4));

    std::fs::write(dir.path().join("bad.json"), r#"{"T": 10}"#).unwrap();
    assert_eq!(code(&["run", "bad.json"]), Some(2));
    std::fs::write(dir.path().join("bad.csv"), "t,error\n1,0.5\n").unwrap();
    assert_eq!(code(&["rate", "bad.csv"]), Some(2));

    assert_eq!(code(&["verify", "lemma3"]), Some(0));
    assert_eq!(code(&["verify", "lemma3", "--h", "1"]), Some(2));
    assert_eq!(code(&["verify", "lemma7", "--sequences", "50"]), Some(0));
    assert_eq!(code(&["verify", "azuma", "--trials", "500"]), Some(0));
}

#[test]
fn verify_grids_hold() {
    let dir = tmp();
    let v = json_out(&asyncq(&["verify", "lemma3", "--grid"], dir.path()));
    assert_eq!(v.as_array().unwrap().len(), 18);
    let v = json_out(&asyncq(&["verify", "lemma7", "--grid", "--sequences", "20"], dir.path()));
    assert!(v.as_array().unwrap().iter().all(|r| r["random"]["holds"] == Value::Bool(true)));
    let v = json_out(&asyncq(&["verify", "azuma", "--grid", "--trials", "1000", "--seed", "3"], dir.path()));
    assert_eq!(v.as_array().unwrap().len(), 12);
}

#[test]
fn output_flag_writes_report_file() {
    let dir = tmp();
    let out = asyncq(
        &["solve", data("two_state.json").to_str().unwrap(), "--output", "q.json"],
        dir.path(),
    );
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("q.json")).unwrap()).unwrap();
    assert!(v["qstar"].is_array());
}
