//! Truncated Taylor coefficient vectors on H^2 with certified tails.
//!
//! A vector stores the first `len` coefficients exactly (up to rounding)
//! and a certificate `(C, rho)` such that `|c_n| <= C rho^n` for every
//! `n >= len`. `C == 0` means the vector has finite support inside `len`.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};

pub const MIN_AUTO_TRUNCATION: usize = 64;
pub const MAX_TRUNCATION: usize = 4096;

const LN_OVERFLOW: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HCoeffVec {
    coeffs: Vec<C64>,
    tail_c: f64,
    tail_rho: f64,
}

impl HCoeffVec {
    pub fn new(coeffs: Vec<C64>, tail_c: f64, tail_rho: f64) -> Result<Self> {
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return invalid("coefficient is not finite");
        }
        if !(tail_c.is_finite() && tail_c >= 0.0) {
            return invalid(format!("tail constant must be finite and >= 0, got {tail_c}"));
        }
        if !(tail_rho.is_finite() && (0.0..1.0).contains(&tail_rho)) {
            return invalid(format!("tail ratio must lie in [0, 1), got {tail_rho}"));
        }
        Ok(Self::raw(coeffs, tail_c, tail_rho))
    }

    fn raw(coeffs: Vec<C64>, tail_c: f64, tail_rho: f64) -> Self {
        if tail_c == 0.0 || tail_rho == 0.0 {
            HCoeffVec { coeffs, tail_c: 0.0, tail_rho: 0.0 }
        } else {
            HCoeffVec { coeffs, tail_c, tail_rho }
        }
    }

    pub fn polynomial(coeffs: Vec<C64>) -> Self {
        Self::raw(coeffs, 0.0, 0.0)
    }

    pub fn zero(len: usize) -> Self {
        Self::polynomial(vec![C64::new(0.0, 0.0); len])
    }

    /// `z^n`.
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); n + 1];
        c[n] = C64::new(1.0, 0.0);
        Self::polynomial(c)
    }

    /// Szego kernel `k_alpha(z) = 1 / (1 - conj(alpha) z)`, coefficients `conj(alpha)^n`.
    pub fn szego(alpha: C64, len: usize) -> Result<Self> {
        let r = alpha.norm();
        if !(r < 1.0) {
            return invalid(format!("kernel point must lie in the open disk, |alpha| = {r}"));
        }
        if r == 0.0 {
            return Ok(Self::polynomial(vec![C64::new(1.0, 0.0)]));
        }
        let a = alpha.conj();
        let mut coeffs = Vec::with_capacity(len);
        let mut p = C64::new(1.0, 0.0);
        for _ in 0..len {
            coeffs.push(p);
            p *= a;
        }
        Ok(Self::raw(coeffs, 1.0, r))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn tail(&self) -> (f64, f64) {
        (self.tail_c, self.tail_rho)
    }

    pub fn is_finite_support(&self) -> bool {
        self.tail_c == 0.0
    }

    /// Coefficient `n` if stored, zero past the support of a finite vector.
    pub fn coeff(&self, n: usize) -> Option<C64> {
        match self.coeffs.get(n) {
            Some(c) => Some(*c),
            None if self.is_finite_support() => Some(C64::new(0.0, 0.0)),
            None => None,
        }
    }

    /// Dense copy of the first `n` coefficients (zero padded).
    pub fn dense(&self, n: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        let m = n.min(self.len());
        v[..m].copy_from_slice(&self.coeffs[..m]);
        v
    }

    /// l2 norm of the coefficients with index `>= n` (stored part exact, rest bounded).
    pub fn mass_beyond(&self, n: usize) -> f64 {
        let stored: f64 = self.coeffs.iter().skip(n).map(|c| c.norm_sqr()).sum();
        let from = n.max(self.len());
        (stored + self.tail_sq_from(from)).sqrt()
    }

    /// Bound on `sum_{j >= n} |c_j|^2` for `n >= len`.
    fn tail_sq_from(&self, n: usize) -> f64 {
        if self.tail_c == 0.0 {
            return 0.0;
        }
        let r2 = self.tail_rho * self.tail_rho;
        self.tail_c * self.tail_c * r2.powi(n as i32) / (1.0 - r2)
    }

    /// Smallest `N` with `C rho^N / (1 - rho) < target`, at least the stored length.
    pub fn required_truncation(&self, target: f64) -> usize {
        if self.tail_c == 0.0 {
            return self.last_nonzero().map_or(1, |d| d + 1);
        }
        let rho = self.tail_rho;
        let lhs = (target * (1.0 - rho) / self.tail_c).ln();
        let n = (lhs / rho.ln()).ceil().max(0.0);
        if n > MAX_TRUNCATION as f64 * 4.0 {
            return usize::MAX;
        }
        n as usize + 1
    }

    pub fn last_nonzero(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| c.norm_sqr() > 0.0)
    }

    /// `ln G` with `|c_n| <= G rho^n` for every n; `None` for finite support.
    fn ln_envelope(&self) -> Option<f64> {
        if self.tail_c == 0.0 {
            return None;
        }
        let lr = self.tail_rho.ln();
        let mut g = self.tail_c.ln();
        for (n, c) in self.coeffs.iter().enumerate() {
            let a = c.norm();
            if a > 0.0 {
                g = g.max(a.ln() - n as f64 * lr);
            }
        }
        Some(g)
    }

    /// Keeps the first `n` coefficients and folds the rest into the tail.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n >= self.len() {
            return Ok(self.clone());
        }
        let dropped = &self.coeffs[n..];
        let kept = self.coeffs[..n].to_vec();
        if self.tail_c == 0.0 {
            if dropped.iter().all(|c| c.norm_sqr() == 0.0) {
                return Ok(Self::polynomial(kept));
            }
            // finite support pushed past n: cover it with a geometric envelope
            let rho = 0.9f64;
            let mut lg = f64::NEG_INFINITY;
            for (i, c) in dropped.iter().enumerate() {
                let a = c.norm();
                if a > 0.0 {
                    lg = lg.max(a.ln() - (n + i) as f64 * rho.ln());
                }
            }
            if lg > LN_OVERFLOW {
                return Err(Error::TailOverflow("truncating a long polynomial".into()));
            }
            return Ok(Self::raw(kept, lg.exp(), rho));
        }
        let lr = self.tail_rho.ln();
        let mut lg = self.tail_c.ln();
        for (i, c) in dropped.iter().enumerate() {
            let a = c.norm();
            if a > 0.0 {
                lg = lg.max(a.ln() - (n + i) as f64 * lr);
            }
        }
        if lg > LN_OVERFLOW {
            return Err(Error::TailOverflow("truncation envelope".into()));
        }
        Ok(Self::raw(kept, lg.exp(), self.tail_rho))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::raw(self.coeffs.iter().map(|c| c * s).collect(), self.tail_c * s.norm(), self.tail_rho)
    }

    /// Aligns two vectors: finite ones are zero padded, geometric ones truncated.
    fn align(a: &Self, b: &Self) -> Result<(Self, Self)> {
        let target = match (a.is_finite_support(), b.is_finite_support()) {
            (true, true) => a.len().max(b.len()),
            (true, false) => b.len(),
            (false, true) => a.len(),
            (false, false) => a.len().min(b.len()),
        };
        let fit = |v: &Self| -> Result<Self> {
            if v.len() >= target {
                v.truncate(target)
            } else {
                Ok(Self::raw(v.dense(target), v.tail_c, v.tail_rho))
            }
        };
        Ok((fit(a)?, fit(b)?))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = Self::align(self, other)?;
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect();
        Ok(Self::raw(coeffs, a.tail_c + b.tail_c, a.tail_rho.max(b.tail_rho)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// `sum_i s_i f_i`.
    pub fn combination(terms: &[(C64, &Self)]) -> Result<Self> {
        let mut acc = Self::polynomial(vec![]);
        for (s, f) in terms {
            acc = acc.add(&f.scale(*s))?;
        }
        Ok(acc)
    }

    /// Pointwise product of functions (Cauchy product of coefficients).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let conv = |a: &[C64], b: &[C64], n: usize| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (i, x) in a.iter().enumerate().take(n) {
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                for (j, y) in b.iter().enumerate().take(n - i) {
                    out[i + j] += x * y;
                }
            }
            out
        };
        match (self.is_finite_support(), other.is_finite_support()) {
            (true, true) => {
                let n = match (self.last_nonzero(), other.last_nonzero()) {
                    (Some(d1), Some(d2)) => (d1 + d2 + 1).max(self.len().max(other.len())),
                    _ => self.len().max(other.len()),
                };
                Ok(Self::polynomial(conv(&self.coeffs, &other.coeffs, n)))
            }
            (true, false) | (false, true) => {
                let (p, g) = if self.is_finite_support() { (self, other) } else { (other, self) };
                let n = g.len();
                let lg = g.ln_envelope().unwrap();
                let lr = g.tail_rho.ln();
                let mut lsum = f64::NEG_INFINITY;
                for (i, c) in p.coeffs.iter().enumerate() {
                    let a = c.norm();
                    if a > 0.0 {
                        lsum = log_add(lsum, a.ln() - i as f64 * lr);
                    }
                }
                let lc = lg + lsum;
                if lc > LN_OVERFLOW {
                    return Err(Error::TailOverflow("polynomial times series".into()));
                }
                let coeffs = conv(&p.coeffs, &g.coeffs, n);
                Ok(Self::raw(coeffs, if lsum.is_finite() { lc.exp() } else { 0.0 }, g.tail_rho))
            }
            (false, false) => {
                let n = self.len().min(other.len());
                let lg = self.ln_envelope().unwrap() + other.ln_envelope().unwrap();
                let a = self.tail_rho.max(other.tail_rho);
                let b = self.tail_rho.min(other.tail_rho);
                let (lk, rho) = if b / a <= 0.9 {
                    (-(1.0 - b / a).ln(), a)
                } else {
                    // sum_i a^i b^(n-i) <= (n+1) a^n <= K a'^n
                    let ap = a + (1.0 - a) / 16.0;
                    let r = a / ap;
                    let k = (1.0 / (-std::f64::consts::E * r * r.ln())).max(1.0);
                    (k.ln(), ap)
                };
                if lg + lk > LN_OVERFLOW {
                    return Err(Error::TailOverflow("series product".into()));
                }
                Ok(Self::raw(conv(&self.coeffs, &other.coeffs, n), (lg + lk).exp(), rho))
            }
        }
    }

    /// Multiplication by `z^m`; the stored length grows by `m`.
    pub fn shift_up(&self, m: usize) -> Result<Self> {
        let mut coeffs = vec![C64::new(0.0, 0.0); m];
        coeffs.extend_from_slice(&self.coeffs);
        if self.tail_c == 0.0 {
            return Ok(Self::polynomial(coeffs));
        }
        let lc = self.tail_c.ln() - m as f64 * self.tail_rho.ln();
        if lc > LN_OVERFLOW {
            return Err(Error::TailOverflow("shift".into()));
        }
        Ok(Self::raw(coeffs, lc.exp(), self.tail_rho))
    }

    /// Backward shift `S*^m`: drops the first `m` coefficients; tail `(C rho^m, rho)`.
    pub fn backward_shift(&self, m: usize) -> Self {
        let coeffs = self.coeffs.iter().skip(m).copied().collect();
        Self::raw(coeffs, self.tail_c * self.tail_rho.powi(m as i32), self.tail_rho)
    }

    /// `f(z^k)`.
    pub fn compose_zk(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("compose_zk needs k >= 1");
        }
        if self.is_empty() {
            return Ok(Self::raw(vec![], self.tail_c, self.tail_rho.powf(1.0 / k as f64)));
        }
        let len = (self.len() - 1) * k + 1;
        let mut coeffs = vec![C64::new(0.0, 0.0); len];
        for (j, c) in self.coeffs.iter().enumerate() {
            coeffs[j * k] = *c;
        }
        Ok(Self::raw(coeffs, self.tail_c, self.tail_rho.powf(1.0 / k as f64)))
    }

    /// `<f, g> = sum f_n conj(g_n)` over the shared stored range, with a bound on the rest.
    pub fn inner(&self, other: &Self) -> (C64, f64) {
        let l = self.len().min(other.len());
        let mut s = C64::new(0.0, 0.0);
        for n in 0..l {
            s += self.coeffs[n] * other.coeffs[n].conj();
        }
        let (long, short) = if self.len() >= other.len() { (self, other) } else { (other, self) };
        let mut bound = 0.0;
        if short.tail_c > 0.0 {
            let mut env = short.tail_c * short.tail_rho.powi(l as i32);
            for n in l..long.len() {
                bound += long.coeffs[n].norm() * env;
                env *= short.tail_rho;
            }
        } else {
            // short vector vanishes past its length: the overlap is exact
        }
        if short.tail_c > 0.0 && long.tail_c > 0.0 {
            let m = long.len();
            let r = short.tail_rho * long.tail_rho;
            bound += short.tail_c * long.tail_c * r.powi(m as i32) / (1.0 - r);
        }
        (s, bound)
    }

    pub fn norm_sq(&self) -> (f64, f64) {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (s, self.tail_sq_from(self.len()))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().0.sqrt()
    }

    /// `f(w)` with a bound on the omitted tail; needs `rho |w| < 1`.
    pub fn evaluate(&self, w: C64) -> Result<(C64, f64)> {
        let r = self.tail_rho * w.norm();
        if self.tail_c > 0.0 && r >= 1.0 {
            return invalid(format!("evaluation point outside the certified radius (rho|w| = {r})"));
        }
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        let bound = if self.tail_c == 0.0 {
            0.0
        } else {
            self.tail_c * r.powi(self.len() as i32) / (1.0 - r)
        };
        Ok((acc, bound))
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}


/// Orthonormal family spanning the numerical span of `vectors` (modified
/// Gram-Schmidt, one reorthogonalization pass). Remainders below `rank_tol` are dropped.
pub fn orthonormalize(vectors: &[HCoeffVec], rank_tol: f64) -> Result<Vec<HCoeffVec>> {
    let mut basis: Vec<HCoeffVec> = Vec::new();
    for v in vectors {
        let mut x = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let (p, _) = x.inner(q);
                x = x.sub(&q.scale(p))?;
            }
        }
        let nrm = x.norm();
        if nrm > rank_tol {
            basis.push(x.scale(C64::new(1.0 / nrm, 0.0)));
        }
    }
    Ok(basis)
}

/// Orthonormal basis of the complement of `span(vectors)` inside the first `n` coordinates.
pub fn complement_basis(vectors: &[HCoeffVec], n: usize, tol: &crate::tol::Tolerances) -> Result<Vec<HCoeffVec>> {
    use crate::linalg::{null_space, CMat};
    for v in vectors {
        let m = v.mass_beyond(n);
        if m > tol.tail {
            let need = v.required_truncation(tol.tail).max(n + 1);
            return Err(Error::InsufficientTruncation { needed: need, have: n });
        }
    }
    let q = orthonormalize(vectors, tol.rank)?;
    let mut m = CMat::zeros(q.len(), n);
    for (i, f) in q.iter().enumerate() {
        for (j, c) in f.dense(n).iter().enumerate() {
            m[(i, j)] = c.conj();
        }
    }
    let ns = null_space(&m, tol.rank.sqrt());
    Ok((0..ns.ncols())
        .map(|j| HCoeffVec::polynomial(ns.column(j).iter().copied().collect()))
        .collect())
}

#[cfg(test)]
mod gram_tests {
    use super::*;
    use crate::tol::Tolerances;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn orthonormalize_examples() {
        let one = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let opz = HCoeffVec::polynomial(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let q = orthonormalize(&[one.clone(), opz.clone()], 1e-10).unwrap();
        assert_eq!(q.len(), 2);
        assert!((q[1].coeffs()[1] - c(1.0, 0.0)).norm() < 1e-15 && q[1].coeffs()[0].norm() < 1e-15);
        let q = orthonormalize(&[opz.clone(), opz], 1e-10).unwrap();
        assert_eq!(q.len(), 1);
        assert!((q[0].coeffs()[0] - c(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn complement_of_monomials() {
        let t = Tolerances::default();
        let one = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let z = HCoeffVec::monomial(1);
        let cb = complement_basis(std::slice::from_ref(&one), 4, &t).unwrap();
        assert_eq!(cb.len(), 3);
        let cb = complement_basis(&[one, z], 4, &t).unwrap();
        assert_eq!(cb.len(), 2);
        for f in &cb {
            assert!(f.coeffs()[0].norm() < 1e-12 && f.coeffs()[1].norm() < 1e-12);
        }
    }

    #[test]
    fn complement_rejects_short_truncation() {
        let k = HCoeffVec::szego(c(0.9, 0.0), 400).unwrap();
        let r = complement_basis(&[k], 50, &Tolerances::default());
        assert!(matches!(r, Err(Error::InsufficientTruncation { .. })));
    }
}
