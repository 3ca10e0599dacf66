#![allow(dead_code)]

use std::path::PathBuf;

use quasinormal_cli::{run, Command, Outcome, RunConfig, REPORT_SCHEMA};
use serde_json::Value;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn read_json(path: &std::path::Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn check_spec(spec: &Value) -> Outcome {
    run(&RunConfig::new(Command::Check).with_spec(spec))
}

/// Schema violations as strings (empty when the report validates).
pub fn schema_errors(report: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).expect("schema parses");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

/// Structural comparison: same keys, equal strings/bools, numbers within
/// `1e-12 + 1e-9 |want|`. Returns the first mismatch path.
pub fn same_report(got: &Value, want: &Value, path: &str) -> Result<(), String> {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            if (a - b).abs() <= 1e-12 + 1e-9 * b.abs() {
                Ok(())
            } else {
                Err(format!("{path}: {a} vs {b}"))
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Err(format!("{path}: length {} vs {}", a.len(), b.len()));
            }
            a.iter().zip(b).enumerate().try_for_each(|(i, (x, y))| same_report(x, y, &format!("{path}[{i}]")))
        }
        (Value::Object(a), Value::Object(b)) => {
            let ka: Vec<_> = a.keys().collect();
            let kb: Vec<_> = b.keys().collect();
            if ka != kb {
                return Err(format!("{path}: keys {ka:?} vs {kb:?}"));
            }
            a.iter().try_for_each(|(k, x)| same_report(x, &b[k], &format!("{path}.{k}")))
        }
        (a, b) if a == b => Ok(()),
        (a, b) => Err(format!("{path}: {a} vs {b}")),
    }
}
