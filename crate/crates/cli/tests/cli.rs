use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rhythm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhythm")).args(args).output().expect("binary runs")
}

fn small_simulation(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
  "experiment": "simulation",
  "name": "small",
  "compare_baseline": true,
  "scenario": {
    "population": 12,
    "duration_s": 240,
    "gamma_s": 120,
    "tau_p_s": 60,
    "r": 0.5,
    "reachability": {"mode": "outage", "start_s": 0, "end_s": 240},
    "exhausted": {"fraction": 0.1},
    "preload": "run",
    "seed": 3
  }
}"#,
    )
    .unwrap();
    path
}

#[test]
fn run_writes_tables_traces_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_simulation(dir.path());
    let out = dir.path().join("out");
    let o = rhythm(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for label in ["baseline", "rhythm"] {
        let csv = fs::read_to_string(out.join(format!("small_{label}.csv"))).unwrap();
        assert!(csv.starts_with("slot,vpki_count,selfcert_count"));
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(out.join(format!("small_{label}_trace.jsonl")).exists());
        assert!(out.join(format!("small_{label}_log.json")).exists());
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("[rhythm]"));
}

#[test]
fn run_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_simulation(dir.path());
    let read = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = rhythm(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        (fs::read(out.join("small_rhythm_log.json")).unwrap(), fs::read(out.join("small_rhythm_trace.jsonl")).unwrap())
    };
    let a = read("a", "11");
    assert_eq!(a, read("b", "11"));
    assert_ne!(a, read("c", "12"));
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = rhythm(&["run", "--scenario", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn invalid_scenario_lists_issues() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"experiment":"simulation","scenario":{"population":0,"r":1.5}}"#).unwrap();
    let o = rhythm(&["run", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("population"), "{err}");
    assert!(err.contains('r'), "{err}");
}

#[test]
fn k_sweep_honors_trials_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    fs::write(&path, r#"{"experiment":"k_sweep","name":"k","n":20,"r":0.5,"k_values":[0,5,20],"trials":10}"#).unwrap();
    let out = dir.path().join("out");
    let o = rhythm(&["run", "--scenario", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trials", "2000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("k.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("K,analytic,empirical,stderr"));
    assert_eq!(csv.lines().count(), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("trials=2000"));
}

#[test]
fn verify_formulas_passes_on_correct_forms() {
    let o = rhythm(&["verify-formulas", "--trials", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));
}

#[test]
fn verify_formulas_flags_an_injected_fault() {
    let o = rhythm(&["verify-formulas", "--trials", "20000", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("failing cell: self_to_self"), "{err}");
    assert!(!err.contains("failing cell: baseline"), "{err}");
}

#[test]
fn help_lists_subcommands_and_hides_fault_flag() {
    let o = rhythm(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["run", "verify-formulas", "bench-crypto"] {
        assert!(text.contains(sub), "{text}");
    }
    let o = rhythm(&["verify-formulas", "--help"]);
    assert!(!String::from_utf8_lossy(&o.stdout).contains("inject"));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(rhythm(&["run"]).status.code(), Some(2));
    assert_eq!(rhythm(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bench_crypto_reports_medians_and_warns_on_few_iterations() {
    let o = rhythm(&["bench-crypto", "--iterations", "5"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    if out.starts_with("skipping") {
        return;
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    for op in ["sign", "verify", "group_sign", "group_verify"] {
        assert!(out.lines().any(|l| l.starts_with(op)), "{out}");
    }
    assert!(out.contains("56.0") && out.contains("82.5"));
}
