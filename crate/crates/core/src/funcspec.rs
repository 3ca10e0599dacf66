//! Symbolic H^2 functions as they appear in JSON operator specs.
//!
//! Grammar (complex numbers are `[re, im]`):
//!
//! ```text
//! {"poly": [[re,im], ...]}
//! {"szego": {"alpha": [re,im]}}
//! {"blaschke_kernel": {"alpha": [re,im], "power": p}}      B_alpha^p k_alpha
//! {"blaschke": {"alpha": [re,im], "power": p}}             B_alpha^p
//! {"scale": [re,im], "of": f}
//! {"sum": [f, ...]}
//! {"product": [f, ...]}
//! {"zshift": m, "of": f}                                   z^m f
//! {"subst_zk": k, "of": f}                                 f(z^k)
//! ```

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::error::{invalid, Result};
use crate::hardy::HCoeffVec;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Poly(Vec<C64>),
    Szego(C64),
    BlaschkeKernel { alpha: C64, power: u32 },
    Blaschke { alpha: C64, power: u32 },
    Scale(C64, Box<FunctionSpec>),
    Sum(Vec<FunctionSpec>),
    Product(Vec<FunctionSpec>),
    ZShift(usize, Box<FunctionSpec>),
    SubstZk(usize, Box<FunctionSpec>),
}

pub fn complex_to_json(c: C64) -> Value {
    json!([c.re, c.im])
}

pub fn complex_from_json(v: &Value) -> Result<C64> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => invalid(format!("complex number must be [re, im], got {v}")),
        },
        _ => match v.as_f64() {
            Some(re) => Ok(C64::new(re, 0.0)),
            None => invalid(format!("complex number must be [re, im], got {v}")),
        },
    }
}

fn disk_point(v: &Value) -> Result<C64> {
    let a = complex_from_json(v)?;
    if !(a.norm() < 1.0) {
        return invalid(format!("point must lie in the open unit disk, got {a}"));
    }
    Ok(a)
}

impl FunctionSpec {
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); n + 1];
        c[n] = C64::new(1.0, 0.0);
        FunctionSpec::Poly(c)
    }

    pub fn scaled(self, s: C64) -> Self {
        FunctionSpec::Scale(s, Box::new(self))
    }

    pub fn zshift(self, m: usize) -> Self {
        if m == 0 {
            self
        } else {
            FunctionSpec::ZShift(m, Box::new(self))
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = match v.as_object() {
            Some(o) => o,
            None => return invalid(format!("function fragment must be an object, got {v}")),
        };
        let usize_field = |key: &str| -> Result<usize> {
            obj.get(key)
                .and_then(Value::as_u64)
                .map(|x| x as usize)
                .ok_or_else(|| crate::error::Error::InvalidInput(format!("`{key}` must be a non-negative integer")))
        };
        let of = || -> Result<Box<FunctionSpec>> {
            match obj.get("of") {
                Some(f) => Ok(Box::new(FunctionSpec::from_json(f)?)),
                None => invalid("missing `of`"),
            }
        };
        let list = |x: &Value| -> Result<Vec<FunctionSpec>> {
            match x.as_array() {
                Some(a) => a.iter().map(FunctionSpec::from_json).collect(),
                None => invalid("expected a list of fragments"),
            }
        };
        let kernel_args = |x: &Value| -> Result<(C64, u32)> {
            let alpha = disk_point(x.get("alpha").unwrap_or(&Value::Null))?;
            let power = x.get("power").and_then(Value::as_u64).unwrap_or(1) as u32;
            Ok((alpha, power))
        };
        if let Some(p) = obj.get("poly") {
            let coeffs = match p.as_array() {
                Some(a) => a.iter().map(complex_from_json).collect::<Result<Vec<_>>>()?,
                None => return invalid("`poly` must be a list of coefficients"),
            };
            return Ok(FunctionSpec::Poly(coeffs));
        }
        if let Some(s) = obj.get("szego") {
            return Ok(FunctionSpec::Szego(disk_point(s.get("alpha").unwrap_or(&Value::Null))?));
        }
        if let Some(b) = obj.get("blaschke_kernel") {
            let (alpha, power) = kernel_args(b)?;
            return Ok(FunctionSpec::BlaschkeKernel { alpha, power });
        }
        if let Some(b) = obj.get("blaschke") {
            let (alpha, power) = kernel_args(b)?;
            return Ok(FunctionSpec::Blaschke { alpha, power });
        }
        if let Some(s) = obj.get("scale") {
            return Ok(FunctionSpec::Scale(complex_from_json(s)?, of()?));
        }
        if let Some(s) = obj.get("sum") {
            return Ok(FunctionSpec::Sum(list(s)?));
        }
        if let Some(s) = obj.get("product") {
            return Ok(FunctionSpec::Product(list(s)?));
        }
        if obj.contains_key("zshift") {
            return Ok(FunctionSpec::ZShift(usize_field("zshift")?, of()?));
        }
        if obj.contains_key("subst_zk") {
            let k = usize_field("subst_zk")?;
            if k == 0 {
                return invalid("`subst_zk` must be >= 1");
            }
            return Ok(FunctionSpec::SubstZk(k, of()?));
        }
        invalid(format!("unknown function fragment {v}"))
    }

    pub fn to_json(&self) -> Value {
        match self {
            FunctionSpec::Poly(c) => json!({"poly": c.iter().map(|x| complex_to_json(*x)).collect::<Vec<_>>()}),
            FunctionSpec::Szego(a) => json!({"szego": {"alpha": complex_to_json(*a)}}),
            FunctionSpec::BlaschkeKernel { alpha, power } => {
                json!({"blaschke_kernel": {"alpha": complex_to_json(*alpha), "power": power}})
            }
            FunctionSpec::Blaschke { alpha, power } => {
                json!({"blaschke": {"alpha": complex_to_json(*alpha), "power": power}})
            }
            FunctionSpec::Scale(s, f) => json!({"scale": complex_to_json(*s), "of": f.to_json()}),
            FunctionSpec::Sum(fs) => json!({"sum": fs.iter().map(|f| f.to_json()).collect::<Vec<_>>()}),
            FunctionSpec::Product(fs) => json!({"product": fs.iter().map(|f| f.to_json()).collect::<Vec<_>>()}),
            FunctionSpec::ZShift(m, f) => json!({"zshift": m, "of": f.to_json()}),
            FunctionSpec::SubstZk(k, f) => json!({"subst_zk": k, "of": f.to_json()}),
        }
    }

    /// Coefficients `0..n` exactly (up to rounding), longer finite supports kept whole.
    pub fn materialize(&self, n: usize) -> Result<HCoeffVec> {
        let v = self.build(n)?;
        if v.is_finite_support() && v.len() > n {
            return match v.last_nonzero() {
                Some(d) if d >= n => Ok(v),
                _ => v.truncate(n),
            };
        }
        if v.len() > n {
            v.truncate(n)
        } else if v.is_finite_support() {
            Ok(HCoeffVec::polynomial(v.dense(n)))
        } else {
            Ok(v)
        }
    }

    fn build(&self, n: usize) -> Result<HCoeffVec> {
        let one = || HCoeffVec::polynomial(vec![C64::new(1.0, 0.0)]);
        match self {
            FunctionSpec::Poly(c) => Ok(HCoeffVec::polynomial(c.clone())),
            FunctionSpec::Szego(a) => HCoeffVec::szego(*a, n),
            FunctionSpec::BlaschkeKernel { alpha, power } => {
                let mut f = HCoeffVec::szego(*alpha, n)?;
                let b = blaschke_factor(*alpha, n)?;
                for _ in 0..*power {
                    f = f.mul(&b)?;
                }
                Ok(f)
            }
            FunctionSpec::Blaschke { alpha, power } => {
                let mut f = one();
                let b = blaschke_factor(*alpha, n)?;
                for _ in 0..*power {
                    f = f.mul(&b)?;
                }
                Ok(f)
            }
            FunctionSpec::Scale(s, f) => Ok(f.build(n)?.scale(*s)),
            FunctionSpec::Sum(fs) => {
                let mut acc = HCoeffVec::polynomial(vec![]);
                for f in fs {
                    acc = acc.add(&f.build(n)?)?;
                }
                Ok(acc)
            }
            FunctionSpec::Product(fs) => {
                let mut acc = one();
                for f in fs {
                    acc = acc.mul(&f.build(n)?)?;
                }
                Ok(acc)
            }
            FunctionSpec::ZShift(m, f) => f.build(n.saturating_sub(*m).max(1))?.shift_up(*m),
            FunctionSpec::SubstZk(k, f) => f.build(n.div_ceil(*k) + 1)?.compose_zk(*k),
        }
    }

    /// Picks `N` so that the materialized tail falls below `tail_target`.
    pub fn auto_truncation(&self, tail_target: f64) -> Result<usize> {
        let mut n = crate::hardy::MIN_AUTO_TRUNCATION;
        for _ in 0..8 {
            let v = self.materialize(n)?;
            let need = v.required_truncation(tail_target).max(v.len());
            if need <= n {
                return Ok(n);
            }
            if need > crate::hardy::MAX_TRUNCATION {
                return Err(crate::error::Error::InsufficientTruncation {
                    needed: need,
                    have: crate::hardy::MAX_TRUNCATION,
                });
            }
            n = need;
        }
        Ok(n)
    }
}

/// `B_alpha = (z - alpha) k_alpha`.
pub fn blaschke_factor(alpha: C64, n: usize) -> Result<HCoeffVec> {
    let lin = HCoeffVec::polynomial(vec![-alpha, C64::new(1.0, 0.0)]);
    lin.mul(&HCoeffVec::szego(alpha, n)?)
}
