//! Operator specs as they appear in JSON input and in generated instances.
//!
//! ```text
//! {"kind": "perturbed_shift", "k": 1, "u": <fn>, "v": <fn>, "N": 128 | "auto"}
//! {"kind": "shift", "k": 2, "N": 64}
//! {"kind": "dim1_cnu", "alphas": [[re,im], ...], "N": 64}
//! {"kind": "direct_sum", "diag": [[re,im], ...], "shift": 1, "N": 64}
//! {"kind": "matrix", "rows": [[[re,im], ...], ...], "growth": 0, "support": 0}
//! ```
//!
//! `kind` may be omitted when `u` and `v` are present.

use num_complex::Complex64 as C64;
use serde_json::{json, Map, Value};

use crate::error::{invalid, Error, Result};
use crate::funcspec::{complex_from_json, complex_to_json, FunctionSpec};
use crate::hardy::{MAX_TRUNCATION, MIN_AUTO_TRUNCATION};
use crate::linalg::CMat;
use crate::operators::{effective_support, TruncOperator};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Auto,
    Fixed(usize),
}

impl Truncation {
    pub fn from_json(v: Option<&Value>) -> Result<Self> {
        match v {
            None => Ok(Truncation::Auto),
            Some(Value::String(s)) if s == "auto" => Ok(Truncation::Auto),
            Some(x) => match x.as_u64() {
                Some(n) if n >= 1 => Ok(Truncation::Fixed(n as usize)),
                _ => invalid(format!("`N` must be a positive integer or \"auto\", got {x}")),
            },
        }
    }

    pub fn to_json(self) -> Value {
        match self {
            Truncation::Auto => json!("auto"),
            Truncation::Fixed(n) => json!(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    PerturbedShift { k: usize, u: FunctionSpec, v: FunctionSpec, n: Truncation },
    Shift { k: usize, n: Truncation },
    Dim1Cnu { alphas: Vec<C64>, n: Truncation },
    DirectSum { diag: Vec<C64>, shift: usize, n: Truncation },
    Matrix { rows: CMat, growth: usize, support: usize },
}

fn complex_list(v: Option<&Value>, what: &str) -> Result<Vec<C64>> {
    match v.and_then(Value::as_array) {
        Some(a) => a
            .iter()
            .enumerate()
            .map(|(i, x)| complex_from_json(x).map_err(|e| Error::InvalidInput(format!("{what}[{i}]: {e}"))))
            .collect(),
        None => invalid(format!("`{what}` must be a list of complex numbers")),
    }
}

fn clamp_auto(n: usize) -> Result<usize> {
    let n = n.max(MIN_AUTO_TRUNCATION);
    if n > MAX_TRUNCATION {
        return Err(Error::InsufficientTruncation { needed: n, have: MAX_TRUNCATION });
    }
    Ok(n)
}

impl OperatorSpec {
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = match v.as_object() {
            Some(o) => o,
            None => return invalid("operator spec must be a JSON object"),
        };
        let kind = match obj.get("kind") {
            Some(Value::String(s)) => s.as_str(),
            Some(other) => return invalid(format!("`kind` must be a string, got {other}")),
            None if obj.contains_key("u") && obj.contains_key("v") => "perturbed_shift",
            None => return invalid("missing `kind`"),
        };
        let usize_of = |key: &str, default: Option<usize>| -> Result<usize> {
            match obj.get(key) {
                Some(x) => x
                    .as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| Error::InvalidInput(format!("`{key}` must be a non-negative integer"))),
                None => default.ok_or_else(|| Error::InvalidInput(format!("missing `{key}`"))),
            }
        };
        let n = Truncation::from_json(obj.get("N"))?;
        let func = |key: &str| -> Result<FunctionSpec> {
            match obj.get(key) {
                Some(f) => FunctionSpec::from_json(f).map_err(|e| Error::InvalidInput(format!("`{key}`: {e}"))),
                None => invalid(format!("missing `{key}`")),
            }
        };
        match kind {
            "perturbed_shift" => {
                let k = usize_of("k", None)?;
                Ok(OperatorSpec::PerturbedShift { k, u: func("u")?, v: func("v")?, n })
            }
            "shift" => Ok(OperatorSpec::Shift { k: usize_of("k", None)?, n }),
            "dim1_cnu" => Ok(OperatorSpec::Dim1Cnu { alphas: complex_list(obj.get("alphas"), "alphas")?, n }),
            "direct_sum" => Ok(OperatorSpec::DirectSum {
                diag: complex_list(obj.get("diag"), "diag")?,
                shift: usize_of("shift", Some(0))?,
                n,
            }),
            "matrix" => {
                let rows = match obj.get("rows").and_then(Value::as_array) {
                    Some(r) => r,
                    None => return invalid("`rows` must be a list of rows"),
                };
                let parsed: Vec<Vec<C64>> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| complex_list(Some(r), &format!("rows[{i}]")))
                    .collect::<Result<_>>()?;
                let size = parsed.len();
                if parsed.iter().any(|r| r.len() != size) {
                    return invalid("`rows` must form a square matrix");
                }
                let mat = CMat::from_fn(size, size, |i, j| parsed[i][j]);
                Ok(OperatorSpec::Matrix {
                    rows: mat,
                    growth: usize_of("growth", Some(0))?,
                    support: usize_of("support", Some(0))?,
                })
            }
            other => invalid(format!("unknown operator kind `{other}`")),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            OperatorSpec::PerturbedShift { k, u, v, n } => {
                json!({"kind": "perturbed_shift", "k": k, "u": u.to_json(), "v": v.to_json(), "N": n.to_json()})
            }
            OperatorSpec::Shift { k, n } => json!({"kind": "shift", "k": k, "N": n.to_json()}),
            OperatorSpec::Dim1Cnu { alphas, n } => json!({
                "kind": "dim1_cnu",
                "alphas": alphas.iter().map(|a| complex_to_json(*a)).collect::<Vec<_>>(),
                "N": n.to_json(),
            }),
            OperatorSpec::DirectSum { diag, shift, n } => json!({
                "kind": "direct_sum",
                "diag": diag.iter().map(|a| complex_to_json(*a)).collect::<Vec<_>>(),
                "shift": shift,
                "N": n.to_json(),
            }),
            OperatorSpec::Matrix { rows, growth, support } => {
                let r: Vec<Value> = (0..rows.nrows())
                    .map(|i| Value::Array((0..rows.ncols()).map(|j| complex_to_json(rows[(i, j)])).collect()))
                    .collect();
                let mut m = Map::new();
                m.insert("kind".into(), json!("matrix"));
                m.insert("rows".into(), Value::Array(r));
                m.insert("growth".into(), json!(growth));
                m.insert("support".into(), json!(support));
                Value::Object(m)
            }
        }
    }

    pub fn with_truncation(&self, t: Truncation) -> Self {
        let mut s = self.clone();
        match &mut s {
            OperatorSpec::PerturbedShift { n, .. }
            | OperatorSpec::Shift { n, .. }
            | OperatorSpec::Dim1Cnu { n, .. }
            | OperatorSpec::DirectSum { n, .. } => *n = t,
            OperatorSpec::Matrix { .. } => {}
        }
        s
    }

    /// The `N` that `build` will use.
    pub fn resolve_truncation(&self, tol: &Tolerances) -> Result<usize> {
        let fixed = |n: &Truncation| match n {
            Truncation::Fixed(n) => Some(*n),
            Truncation::Auto => None,
        };
        match self {
            OperatorSpec::PerturbedShift { k, u, v, n } => match fixed(n) {
                Some(n) => Ok(n),
                None => {
                    let tail_n = u.auto_truncation(tol.tail)?.max(v.auto_truncation(tol.tail)?);
                    let (uu, vv) = (u.materialize(tail_n)?, v.materialize(tail_n)?);
                    let need = uu.required_truncation(tol.tail).max(vv.required_truncation(tol.tail));
                    let l = effective_support(&uu, tol.tail).max(effective_support(&vv, tol.tail));
                    clamp_auto(need.saturating_add(4 * k + l + 8))
                }
            },
            OperatorSpec::Shift { k, n } => fixed(n).map_or_else(|| clamp_auto(4 * k + 8), Ok),
            OperatorSpec::Dim1Cnu { alphas, n } => {
                let k = alphas.len().saturating_sub(1);
                fixed(n).map_or_else(|| clamp_auto(1 + k * (k + 4) + 3 * k + 8), Ok)
            }
            OperatorSpec::DirectSum { diag, shift, n } => {
                fixed(n).map_or_else(|| clamp_auto(diag.len() + 4 * shift + 8), Ok)
            }
            OperatorSpec::Matrix { rows, .. } => Ok(rows.nrows()),
        }
    }

    pub fn build(&self, tol: &Tolerances) -> Result<TruncOperator> {
        let big_n = self.resolve_truncation(tol)?;
        match self {
            OperatorSpec::PerturbedShift { k, u, v, .. } => {
                let uu = u.materialize(big_n)?;
                let vv = v.materialize(big_n)?;
                TruncOperator::perturbed_shift(*k, &uu, &vv, big_n, tol)
            }
            OperatorSpec::Shift { k, .. } => TruncOperator::shift(*k, big_n),
            OperatorSpec::Dim1Cnu { alphas, .. } => TruncOperator::dim1_cnu(alphas, big_n),
            OperatorSpec::DirectSum { diag, shift, .. } => TruncOperator::direct_sum(diag, *shift, big_n),
            OperatorSpec::Matrix { rows, growth, support } => {
                if *growth == 0 && *support == 0 {
                    TruncOperator::from_matrix(rows.clone())
                } else {
                    TruncOperator::with_layout(rows.clone(), *growth, *support)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_shorthand_rank_one() {
        let v = serde_json::from_str::<Value>(r#"{"k":1,"u":{"poly":[0,-1]},"v":{"poly":[1]}}"#).unwrap();
        let s = OperatorSpec::from_json(&v).unwrap();
        let t = s.build(&Tolerances::default()).unwrap();
        assert_eq!(t.n(), 64);
        let back = OperatorSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn auto_truncation_grows_with_slow_kernels() {
        let v = serde_json::from_str::<Value>(
            r#"{"kind":"perturbed_shift","k":2,"u":{"szego":{"alpha":[0.9,0]}},"v":{"poly":[1]},"N":"auto"}"#,
        )
        .unwrap();
        let s = OperatorSpec::from_json(&v).unwrap();
        let n = s.resolve_truncation(&Tolerances::default()).unwrap();
        assert!(n > 256 && n <= MAX_TRUNCATION);
        s.build(&Tolerances::default()).unwrap();
    }

    #[test]
    fn rejects_bad_specs() {
        for text in [r#"{"kind":"nope"}"#, r#"{"kind":"shift"}"#, r#"{"kind":"matrix","rows":[[1,2]]}"#, r#"[1]"#] {
            let v = serde_json::from_str::<Value>(text).unwrap();
            assert!(OperatorSpec::from_json(&v).is_err(), "{text}");
        }
    }
}
