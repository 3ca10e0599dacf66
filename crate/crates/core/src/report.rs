//! Checker reports and canonical JSON output.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde_json::{json, Map, Value};

use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Isometry,
    Dependent,
    IndependentTypeI,
    IndependentTypeII,
    IndependentOther,
    CnuQuasinormal,
    DiagonalPlusIsometry,
    NotQuasinormal,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Isometry => "isometry",
            Classification::Dependent => "dependent",
            Classification::IndependentTypeI => "independent-type-I",
            Classification::IndependentTypeII => "independent-type-II",
            Classification::IndependentOther => "independent-other",
            Classification::CnuQuasinormal => "cnu-quasinormal",
            Classification::DiagonalPlusIsometry => "diagonal-plus-isometry",
            Classification::NotQuasinormal => "not-quasinormal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub verdict: bool,
    pub classification: Classification,
    pub condition_residuals: BTreeMap<String, f64>,
    pub conditions_hold: BTreeMap<String, bool>,
    /// reported, never used for the verdict
    pub diagnostics: BTreeMap<String, f64>,
    pub oracle_residual: f64,
    pub oracle_verdict: bool,
    pub hyponormal_min_eig: Option<f64>,
    pub consistency_alarm: Option<String>,
    pub certificate: Map<String, Value>,
}

impl CheckReport {
    pub fn new(oracle_residual: f64, residual_tol: f64) -> Self {
        CheckReport {
            verdict: false,
            classification: Classification::NotQuasinormal,
            condition_residuals: BTreeMap::new(),
            conditions_hold: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            oracle_residual,
            oracle_verdict: oracle_residual <= residual_tol,
            hyponormal_min_eig: None,
            consistency_alarm: None,
            certificate: Map::new(),
        }
    }

    /// Records a condition as `residual <= limit`.
    pub fn condition(&mut self, name: &str, residual: f64, limit: f64) -> bool {
        let ok = residual.is_finite() && residual <= limit;
        self.condition_residuals.insert(name.to_string(), residual);
        self.conditions_hold.insert(name.to_string(), ok);
        ok
    }

    /// Records a condition decided elsewhere.
    pub fn flag(&mut self, name: &str, residual: f64, holds: bool) -> bool {
        self.condition_residuals.insert(name.to_string(), residual);
        self.conditions_hold.insert(name.to_string(), holds);
        holds
    }

    pub fn diagnostic(&mut self, name: &str, value: f64) {
        self.diagnostics.insert(name.to_string(), value);
    }

    pub fn cert(&mut self, name: &str, value: Value) {
        self.certificate.insert(name.to_string(), value);
    }

    pub fn all_conditions_hold(&self) -> bool {
        self.conditions_hold.values().all(|&b| b)
    }

    /// Sets the verdict and raises the alarm when it disagrees with the oracle.
    pub fn finish(mut self, verdict: bool, positive: Classification) -> Self {
        self.verdict = verdict;
        self.classification = if verdict { positive } else { Classification::NotQuasinormal };
        if verdict != self.oracle_verdict {
            self.consistency_alarm = Some(format!(
                "checker verdict {} disagrees with oracle residual {:.3e}",
                verdict, self.oracle_residual
            ));
        }
        self
    }

    pub fn to_json(&self) -> Value {
        let mut residuals = Map::new();
        for (k, v) in &self.condition_residuals {
            residuals.insert(k.clone(), json!(v));
        }
        residuals.insert("oracle".into(), json!(self.oracle_residual));
        if let Some(h) = self.hyponormal_min_eig {
            residuals.insert("hyponormal_min_eig".into(), json!(h));
        }
        json!({
            "verdict": self.verdict,
            "classification": self.classification.as_str(),
            "conditions": self.conditions_hold,
            "residuals": residuals,
            "diagnostics": self.diagnostics,
            "oracle_verdict": self.oracle_verdict,
            "consistency_alarm": self.consistency_alarm,
            "certificate": self.certificate,
        })
    }
}

pub fn cjson(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn cvec_json(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|z| cjson(*z)).collect())
}

pub fn cmat_json(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| cjson(m[(i, j)])).collect())).collect())
}

/// Rounds to 15 significant digits and flushes magnitudes below 1e-15 to zero.
pub fn canonical_float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(format!("{x}"));
    }
    if x.abs() < 1e-15 {
        return json!(0.0);
    }
    let s = format!("{x:.14e}");
    json!(s.parse::<f64>().unwrap_or(x))
}

/// Canonical form of a report value: floats rounded, object keys sorted
/// (serde_json's default map is ordered).
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => canonical_float(n.as_f64().unwrap_or(0.0)),
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), canonicalize(x))).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alarm_on_disagreement() {
        let r = CheckReport::new(1.0, 1e-8).finish(true, Classification::Dependent);
        assert!(r.consistency_alarm.is_some());
        let r = CheckReport::new(1e-12, 1e-8).finish(true, Classification::Dependent);
        assert!(r.consistency_alarm.is_none());
        assert_eq!(r.classification, Classification::Dependent);
    }

    #[test]
    fn canonical_floats() {
        assert_eq!(canonical_float(3e-16), json!(0.0));
        assert_eq!(canonical_float(0.1 + 0.2), json!(0.3));
        let v = canonicalize(&json!({"b": [1.0000000000000002, 2], "a": 1e-17}));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":0.0,"b":[1.0,2]}"#);
    }
}
