//! Szego kernels, Blaschke factors and finite Blaschke products.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::hardy::HCoeffVec;

/// Evaluation points are kept this far inside the disk.
pub const MAX_EVAL_RADIUS: f64 = 1.0 - 1e-6;

pub fn szego_kernel(alpha: C64, n: usize) -> Result<HCoeffVec> {
    HCoeffVec::szego(alpha, n)
}

/// `B_alpha = (z - alpha) / (1 - conj(alpha) z)`.
///
/// Coefficients: `-alpha`, then `(1 - |alpha|^2) conj(alpha)^(n-1)`.
pub fn blaschke_factor(alpha: C64, n: usize) -> Result<HCoeffVec> {
    let r = alpha.norm();
    if !(r < 1.0) {
        return invalid(format!("Blaschke zero must lie in the open disk, |alpha| = {r}"));
    }
    if r == 0.0 {
        return Ok(HCoeffVec::monomial(1));
    }
    let a = alpha.conj();
    let w = 1.0 - r * r;
    let mut coeffs = Vec::with_capacity(n.max(2));
    coeffs.push(-alpha);
    let mut p = C64::new(w, 0.0);
    for _ in 1..n.max(2) {
        coeffs.push(p);
        p *= a;
    }
    HCoeffVec::new(coeffs, w / r, r)
}

/// `B_alpha^power * k_alpha`.
pub fn blaschke_kernel_product(alpha: C64, power: u32, n: usize) -> Result<HCoeffVec> {
    let mut f = szego_kernel(alpha, n)?;
    if power > 0 {
        let b = blaschke_factor(alpha, n)?;
        for _ in 0..power {
            f = f.mul(&b)?.truncate(n)?;
        }
    }
    Ok(f)
}

pub fn evaluate(f: &HCoeffVec, w: C64) -> Result<(C64, f64)> {
    if w.norm() > MAX_EVAL_RADIUS {
        return invalid(format!("evaluation point {w} too close to the boundary"));
    }
    f.evaluate(w)
}

pub fn backward_shift(f: &HCoeffVec) -> HCoeffVec {
    f.backward_shift(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlaschkeProduct {
    pub zeros: Vec<C64>,
    pub unimodular_const: C64,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<C64>, unimodular_const: C64) -> Result<Self> {
        if zeros.iter().any(|z| !(z.norm() < 1.0)) {
            return invalid("Blaschke zeros must lie in the open disk");
        }
        if (unimodular_const.norm() - 1.0).abs() > 1e-9 {
            return invalid("Blaschke constant must be unimodular");
        }
        Ok(BlaschkeProduct { zeros, unimodular_const })
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn coefficients(&self, n: usize) -> Result<HCoeffVec> {
        let mut f = HCoeffVec::polynomial(vec![self.unimodular_const]);
        for a in &self.zeros {
            f = f.mul(&blaschke_factor(*a, n)?)?.truncate(n)?;
        }
        Ok(f)
    }

    pub fn value(&self, w: C64) -> C64 {
        self.zeros
            .iter()
            .fold(self.unimodular_const, |acc, a| acc * (w - a) / (C64::new(1.0, 0.0) - a.conj() * w))
    }
}
