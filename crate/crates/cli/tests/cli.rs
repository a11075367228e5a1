use serde_json::Value;
use std::io::Write;
use std::process::{Command, Output, Stdio};

fn gf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugeforge")).args(args).output().expect("binary runs")
}

fn gf_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gaugeforge"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is a JSON report")
}

#[test]
fn non_free_fixture_is_a_gauge_but_not_free() {
    let fx = gf(&["gauge", "fixture", "--p", "2", "--n", "2", "--rank", "1"]);
    assert_eq!(fx.status.code(), Some(0));
    let v = gf_stdin(&["gauge", "validate", "--input", "-"], std::str::from_utf8(&fx.stdout).unwrap());
    assert_eq!(v.status.code(), Some(0));
    let r = report(&v);
    assert_eq!(r["status"], "ok");
    let free = &r["checks"][0];
    assert_eq!(free["name"], "freeness");
    assert_eq!(free["status"], "violated");
    assert!(!free["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn broken_gauge_is_violated() {
    // f = v = 1 on W_2(F_2): fv = 1 != p.
    let g = r#"{"ring":{"p":2,"n":2},"a":0,"components":[[2],[2]],"f":[[[1]]],"v":[[[1]]]}"#;
    let o = gf_stdin(&["gauge", "validate", "--input", "-"], g);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&o)["status"], "violated");
}

#[test]
fn identity_crystal_round_trip() {
    let o = gf(&["crystal", "roundtrip", "--p", "3", "--n", "2", "--rank", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["summary"]["isomorphic"], true);
}

#[test]
fn cris_table_rank_is_binomial() {
    let o = gf(&["cris", "table", "--p", "2", "--d", "2", "--R", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    let row = r["summary"]["ranks"].as_array().unwrap().iter().find(|x| x["r"] == 2).cloned().unwrap();
    assert_eq!(row["naive"], 3);
    assert_eq!(row["nice"], 3);
    assert_eq!(r["summary"]["cartier_bijective"], true);
}

#[test]
fn unknown_suite_and_schema_errors_exit_2() {
    let o = gf(&["suite", "no-such-suite"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["exit"], 2);
    assert_eq!(gf_stdin(&["gauge", "validate", "--input", "-"], "not json").status.code(), Some(2));
    assert_eq!(gf_stdin(&["gauge", "validate", "--input", "-"], r#"{"ring":{"p":2,"n":2},"a":0}"#).status.code(), Some(2));
    assert_eq!(gf(&["witt", "nonsense"]).status.code(), Some(2));
    assert_eq!(gf_stdin(&["run", "--input", "-"], r#"{"command":"witt","action":"check","extra":1}"#).status.code(), Some(2));
}

#[test]
fn injected_fault_is_caught() {
    let o = gf(&["suite", "exhaustive-small", "--inject-fault"]);
    assert_ne!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["status"], "violated");
    assert!(o.stdout.windows(9).any(|w| w == b"witnesses"));
}

#[test]
fn output_is_deterministic() {
    let a = gf(&["suite", "derham-demo", "--seed", "7"]);
    let b = gf(&["suite", "derham-demo", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.windows(9).any(|w| w == b"timing_ms"));
}

#[test]
fn run_job_matches_direct_call() {
    let direct = gf(&["witt", "check", "--p", "3", "--n", "2"]);
    let job = r#"{"command":"witt","action":"check","params":{"p":3,"n":2}}"#;
    let via = gf_stdin(&["run", "--input", "-"], job);
    assert_eq!(via.status.code(), Some(0));
    assert_eq!(direct.stdout, via.stdout);
}

#[test]
fn de_rham_cohomology_of_the_line() {
    let o = gf(&["derham", "cohomology", "--p", "2", "--n", "1", "--deg", "6", "--i", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["checks"][0]["summary"]["de_rham_dims"], serde_json::json!([0, 0, 1, 0, 1, 0, 1]));
}
