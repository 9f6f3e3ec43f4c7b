use std::process::{Command, Output};

fn ggred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ggred")).args(args).env_remove("GGRED_JOBS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config_file(text: &str) -> tempfile::NamedTempFile {
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), text).unwrap();
    f
}

#[test]
fn list_names_scenarios_and_checks_stably() {
    let a = ggred(&["list"]);
    assert!(a.status.success());
    let text = stdout(&a);
    assert!(text.contains("hopf"));
    assert!(text.contains("thm65"));
    assert_eq!(text, stdout(&ggred(&["list"])));
    let json: serde_json::Value = serde_json::from_str(&stdout(&ggred(&["list", "--format", "json"]))).unwrap();
    assert!(json["scenarios"].as_array().unwrap().iter().any(|s| s["name"] == "s3xs1_gk"));
}

#[test]
fn run_config_writes_json_report() {
    let cfg = config_file(r#"{"scenario": "flat_torus", "checks": ["euler"]}"#);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = ggred(&["run", cfg.path().to_str().unwrap(), "--format", "json", "--report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["version", "scenario", "parameters", "seed", "checks", "status"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let check = &report["checks"][0];
    for key in ["id", "points", "max_residual", "tolerance", "status"] {
        assert!(check.get(key).is_some(), "missing checks[].{key}");
    }
    assert_eq!(check["id"], "euler");
    assert_eq!(report["status"], "pass");
}

#[test]
fn run_scenario_with_overrides() {
    let o = ggred(&["run", "--scenario", "hopf", "--set", "lambda=0", "--check", "thm63"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("value 4.0000"));
}

#[test]
fn check_failure_exits_one() {
    let o = ggred(&["run", "--scenario", "s3xs1_gk", "--set", "perturb=0.1", "--check", "gk"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("status fail"));
}

#[test]
fn config_errors_exit_two() {
    let o = ggred(&["run", "--scenario", "hopf", "--set", "lamda=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"));
    let bad = config_file("{\n  \"scenario\": \"hopf\",\n  \"parameters\": {\"lambda\": \"x\"}\n}");
    let o = ggred(&["validate", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert_eq!(ggred(&["run", "--scenario", "nowhere"]).status.code(), Some(2));
    assert_eq!(ggred(&["validate", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn validate_reports_ok_or_the_broken_condition() {
    let good = config_file(r#"{"scenario": "hopf", "parameters": {"lambda": 1.3}}"#);
    let o = ggred(&["validate", good.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "ok");
    let broken = config_file(r#"{"scenario": "hopf", "parameters": {"lambda": 1.0, "xi_shift": 0.5}}"#);
    let o = ggred(&["validate", broken.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("closure d xi_a = i_{V_a} H"), "{}", stderr(&o));
}

#[test]
fn reports_do_not_depend_on_jobs() {
    let run = |jobs: &str| stdout(&ggred(&["run", "--scenario", "hopf_flux", "--set", "samples=3", "--format", "json", "--jobs", jobs]));
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(one, run("1"));
    let seeded = stdout(&ggred(&["run", "--scenario", "hopf_flux", "--set", "samples=3", "--format", "json", "--seed", "9"]));
    assert!(seeded.contains("\"seed\": 9"));
    assert_ne!(seeded, one);
}
