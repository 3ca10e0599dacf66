mod common;

use std::process::{Command, Output};

use common::{golden_dir, schema_errors};
use serde_json::Value;

const S_MINUS: &str = r#"{"kind":"perturbed_shift","k":1,"u":{"poly":[[0,0],[-1,0]]},"v":{"poly":[[1,0]]},"N":128}"#;
const S_PLUS: &str = r#"{"kind":"perturbed_shift","k":1,"u":{"poly":[[0,0],[1,0]]},"v":{"poly":[[1,0]]},"N":128}"#;

fn qn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasinormal")).args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn exit_zero_for_quasinormal() {
    let o = qn(&["check", "--spec", S_MINUS]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(r["verdict"], true);
    assert_eq!(r["command"], "check");
    assert!(schema_errors(&r).is_empty());
}

#[test]
fn exit_one_for_not_quasinormal() {
    let o = qn(&["check", "--spec", S_PLUS]);
    assert_eq!(o.status.code(), Some(1));
    let r = stdout_json(&o);
    assert_eq!(r["verdict"], false);
    assert_eq!(r["classification"], "not-quasinormal");
}

#[test]
fn malformed_spec_reports_location() {
    let o = qn(&["check", "--spec", r#"{"kind":"perturbed_shift","#]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 1, column"), "{e}");
    assert!(o.stdout.is_empty());
}

#[test]
fn malformed_file_names_the_path() {
    let dir = std::env::temp_dir().join(format!("qn-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.json");
    std::fs::write(&p, "{\n  \"kind\": \"shift\",\n  \"k\": \n}").unwrap();
    let o = qn(&["check", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bad.json") && e.contains("line 4"), "{e}");
}

#[test]
fn insufficient_truncation_names_required_n() {
    let spec = r#"{"kind":"perturbed_shift","k":1,"u":{"szego":{"alpha":[0.95,0]}},"v":{"poly":[[1,0]]},"N":16}"#;
    let o = qn(&["check", "--spec", spec]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("need N >=") && e.contains("have 16"), "{e}");
}

#[test]
fn unknown_kind_is_an_error() {
    let o = qn(&["check", "--spec", r#"{"kind":"bilateral_shift"}"#]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn missing_spec_is_an_error() {
    let o = qn(&["check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--input"));
}

#[test]
fn out_writes_the_report_file() {
    let dir = std::env::temp_dir().join(format!("qn-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("report.json");
    let o = qn(&["check", "--spec", S_MINUS, "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(r["verdict"], true);
}

#[test]
fn input_file_matches_golden() {
    let p = golden_dir().join("s_minus_z1.spec.json");
    let o = qn(&["check", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let want = std::fs::read(golden_dir().join("s_minus_z1.report.json")).unwrap();
    let got = stdout_json(&o);
    let want: Value = serde_json::from_slice(&want).unwrap();
    common::same_report(&got, &want, "s_minus_z1").unwrap();
}

#[test]
fn text_format_summarizes() {
    let o = qn(&["check", "--spec", S_PLUS, "--format", "text"]);
    assert_eq!(o.status.code(), Some(1));
    let t = String::from_utf8_lossy(&o.stdout);
    assert!(t.contains("classification: not-quasinormal"), "{t}");
    assert!(t.contains("hyponormal_min_eig"));
}

#[test]
fn stdout_is_byte_identical() {
    let a = qn(&["check", "--spec", S_MINUS]);
    let b = qn(&["check", "--spec", S_MINUS]);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout_json(&a)["timing_ms"].is_null());
}

#[test]
fn timing_flag_fills_timing() {
    let r = stdout_json(&qn(&["check", "--spec", S_MINUS, "--timing"]));
    assert!(r["timing_ms"].as_f64().is_some());
}

#[test]
fn truncation_flag_overrides_spec() {
    let r = stdout_json(&qn(&["check", "--spec", S_MINUS, "--truncation", "64"]));
    assert_eq!(r["truncation"], 64);
    let o = qn(&["check", "--spec", S_MINUS, "--truncation", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_emits_checked_spec() {
    let o = qn(&["generate", "--family", "dependent", "--truncation", "128", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(r["command"], "generate");
    assert_eq!(r["classification"], "dependent");
    assert_eq!(r["spec_echo"]["kind"], "perturbed_shift");
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
}

#[test]
fn theta_for_dependent_case() {
    let o = qn(&["theta", "--spec", S_MINUS]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
}

#[test]
fn oracle_command_agrees() {
    let o = qn(&["oracle", "--spec", S_MINUS]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
    let o = qn(&["oracle", "--spec", S_PLUS]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decompose_and_cnu_check() {
    let spec = r#"{"kind":"shift","k":2,"N":64}"#;
    let o = qn(&["decompose", "--spec", spec]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(schema_errors(&stdout_json(&o)).is_empty());
    let o = qn(&["decompose", "--spec", S_PLUS]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = qn(&["cnu-check", "--spec", S_MINUS]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
    assert!(schema_errors(&stdout_json(&o)).is_empty());
}

#[test]
fn suite_runs_small() {
    let o = qn(&["suite", "--family", "cnu-dim1", "--trials", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(r["command"], "suite");
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
}
