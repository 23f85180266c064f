mod common;

use std::process::{Command, Output};

use common::config_path;

fn brdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brdyn")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    config_path(name).to_string_lossy().into_owned()
}

#[test]
fn equilibria_report_for_the_three_subpopulation_example() {
    let out = brdyn(&["equilibria", "--config", &config("example3.json"), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("c^{11},clean-cut,7/10,asymptotically-stable"));
    assert!(rows[1].starts_with("o^{12},coordinator-driven,3/4,unstable"));
    assert!(rows[2].starts_with("a^{12},anticoordinator-driven,17/20,asymptotically-stable"));

    let json = brdyn(&["equilibria", "--config", &config("example3.json")]);
    let doc: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let states: Vec<_> = doc["equilibria"].as_array().unwrap().iter().map(|e| e["state"].clone()).collect();
    assert_eq!(states[1], serde_json::json!(["3/5", "1/20", "1/10"]));
}

#[test]
fn degenerate_profile_fails_validation() {
    let out = brdyn(&["validate", "--config", &config("degenerate.json")]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["status"], "FAIL");
    assert!(String::from_utf8_lossy(&out.stderr).contains("ValidationFailed"));

    let out = brdyn(&["validate", "--config", &config("degenerate.json"), "--allow-degenerate"]);
    assert_eq!(out.status.code(), Some(0));
    let out = brdyn(&["equilibria", "--config", &config("degenerate.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("AssumptionViolated"));
    let out = brdyn(&["equilibria", "--config", &config("degenerate.json"), "--allow-degenerate"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let args = ["sweep", "--config", &config("example2.json"), "--sizes", "30,60,120", "--replicates", "5", "--seed", "7"];
    let (a, b) = (brdyn(&args), brdyn(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("N,replicate,seed,min_total,max_total,amplitude"));
    assert_eq!(text.lines().count(), 1 + 15);
}

#[test]
fn output_file_matches_stdout_and_config_is_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("classes.csv");
    let cfg = config("example3.json");
    let before = std::fs::read(&cfg).unwrap();
    let args = ["concentration", "--config", &cfg, "--sizes", "20,40"];
    let printed = brdyn(&args);
    let mut with_output = args.to_vec();
    let target_str = target.to_string_lossy().into_owned();
    with_output.extend(["--output", &target_str]);
    let written = brdyn(&with_output);
    assert_eq!(written.status.code(), Some(0));
    assert!(written.stdout.is_empty());
    assert_eq!(std::fs::read(&target).unwrap(), printed.stdout);
    assert!(String::from_utf8_lossy(&printed.stdout).starts_with("N,class_id,abs_lo,abs_hi,hausdorff,mass_within_eps\n"));
    assert_eq!(std::fs::read(&cfg).unwrap(), before);
}

#[test]
fn table_headers() {
    let flow = brdyn(&["flow", "--config", &config("example3.json"), "--fraction", "0.3"]);
    let flow = String::from_utf8(flow.stdout).unwrap();
    assert_eq!(flow.lines().next(), Some("t,x_0,x_1,x_2,total,segment_kind"));

    let sim = brdyn(&["simulate", "--config", &config("example3.json"), "--size", "20", "--steps", "10", "--format", "csv"]);
    let sim = String::from_utf8(sim.stdout).unwrap();
    assert_eq!(sim.lines().next(), Some("step,subpop_0,subpop_1,subpop_2,total_x"));
    assert_eq!(sim.lines().count(), 12);

    let cmp = brdyn(&["compare", "--config", &config("example3.json"), "--size", "20", "--steps", "40"]);
    let cmp = String::from_utf8(cmp.stdout).unwrap();
    assert_eq!(cmp.lines().next(), Some("t,discrete_total,continuous_total"));
}

#[test]
fn decimal_flag_prints_plain_decimals() {
    let out = brdyn(&["equilibria", "--config", &config("example2.json"), "--decimal"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["equilibria"][0]["abstract_value"], "0.885");
    assert_eq!(doc["equilibria"][0]["globally_stable"], true);
}

#[test]
fn drift_check_covers_every_tie_rule() {
    let out = brdyn(&["drift-check", "--config", &config("single_anticoordinator.json"), "--size", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ties: Vec<&str> = doc.as_array().unwrap().iter().map(|r| r["tie"].as_str().unwrap()).collect();
    assert_eq!(ties, ["prefer-a", "prefer-b", "uniform", "self-inclusive"]);
}

#[test]
fn domain_and_usage_errors() {
    let out = brdyn(&["simulate", "--config", &config("example3.json"), "--size", "21", "--steps", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InvalidSize"));

    let out = brdyn(&["concentration", "--config", &config("example2.json"), "--sizes", "300", "--cap", "1000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("StateSpaceTooLarge"));

    assert_eq!(brdyn(&["sweep", "--config", &config("example2.json")]).status.code(), Some(2));
    assert_eq!(brdyn(&["flow", "--config", &config("example2.json"), "--perturb", "sideways"]).status.code(), Some(2));
    assert_eq!(brdyn(&["--version"]).status.code(), Some(0));
}
