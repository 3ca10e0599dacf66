//! Finite sections of shift-like operators with exact-window bookkeeping.
//!
//! Column `n < exact_window` of the stored matrix equals `T e_n` of the
//! infinite operator (up to the declared tail target). A product of three
//! factors consumes two more shift steps, which is where `trusted_columns`
//! comes from.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::hardy::HCoeffVec;
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::tol::Tolerances;

#[derive(Debug, Clone)]
pub enum Origin {
    Shift { k: usize },
    PerturbedShift { k: usize, u: HCoeffVec, v: HCoeffVec },
    Dim1Cnu { alphas: Vec<C64> },
    DirectSum { diag: Vec<C64>, shift: usize },
    Matrix,
}

#[derive(Debug, Clone)]
pub struct TruncOperator {
    mat: CMat,
    /// how far a column can move support upward (the shift multiplicity)
    growth: usize,
    /// index below which every ingredient carries all but `tail` of its mass
    support: usize,
    origin: Origin,
}

/// Smallest `L` with `mass_beyond(L) <= tail`.
pub fn effective_support(f: &HCoeffVec, tail: f64) -> usize {
    let n = f.len();
    let mut acc = f.mass_beyond(n).powi(2);
    let mut l = n;
    while l > 0 {
        let next = acc + f.coeffs()[l - 1].norm_sqr();
        if next.sqrt() > tail {
            break;
        }
        acc = next;
        l -= 1;
    }
    l
}

/// Entries of `u (x) v` below this are left out of the matrix. Products of
/// three of them would be subnormal, which slows dense arithmetic badly.
pub const FLUSH: f64 = 1e-100;

impl TruncOperator {
    pub fn shift(k: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return invalid("shift multiplicity must be >= 1");
        }
        if n <= k {
            return invalid(format!("truncation N = {n} must exceed k = {k}"));
        }
        let mut mat = CMat::zeros(n, n);
        for j in 0..n - k {
            mat[(j + k, j)] = ONE;
        }
        Ok(TruncOperator { mat, growth: k, support: 0, origin: Origin::Shift { k } })
    }

    /// `S_k + u (x) v`, i.e. `f -> z^k f + <f, v> u`.
    pub fn perturbed_shift(k: usize, u: &HCoeffVec, v: &HCoeffVec, n: usize, tol: &Tolerances) -> Result<Self> {
        if u.norm() == 0.0 || v.norm() == 0.0 {
            return invalid("not a rank-one perturbation: u or v is zero");
        }
        let mut op = Self::shift(k, n)?;
        for f in [u, v] {
            if f.mass_beyond(n) > tol.tail {
                let need = f.required_truncation(tol.tail);
                return Err(Error::InsufficientTruncation { needed: need.max(n + 1), have: n });
            }
        }
        let ud = u.dense(n);
        let vd = v.dense(n);
        for j in 0..n {
            let cv = vd[j].conj();
            if cv == ZERO {
                continue;
            }
            for i in 0..n {
                let x = ud[i] * cv;
                if x.norm() >= FLUSH {
                    op.mat[(i, j)] += x;
                }
            }
        }
        op.support = effective_support(u, tol.tail).max(effective_support(v, tol.tail));
        op.origin = Origin::PerturbedShift { k, u: u.clone(), v: v.clone() };
        Ok(op)
    }

    /// The matrix with first column `(alpha_0, ..., alpha_k, 0, ...)` and
    /// `e_n -> e_{n+k}` for `n >= 1`.
    pub fn dim1_cnu(alphas: &[C64], n: usize) -> Result<Self> {
        if alphas.len() < 2 {
            return invalid("dim1_cnu needs k + 1 >= 2 coefficients");
        }
        let k = alphas.len() - 1;
        let s: f64 = alphas.iter().map(|a| a.norm_sqr()).sum();
        if !(s < 1.0) {
            return invalid(format!("sum |alpha_i|^2 must be < 1, got {s}"));
        }
        if n <= 2 * k + 2 {
            return invalid(format!("truncation N = {n} too small for k = {k}"));
        }
        let mut mat = CMat::zeros(n, n);
        for (i, a) in alphas.iter().enumerate() {
            mat[(i, 0)] = *a;
        }
        for j in 1..n - k {
            mat[(j + k, j)] = ONE;
        }
        Ok(TruncOperator { mat, growth: k, support: k + 1, origin: Origin::Dim1Cnu { alphas: alphas.to_vec() } })
    }

    /// `diag(entries)` on the first coordinates, then `S_shift` on the rest
    /// (`shift == 0`: the diagonal alone, as a finite matrix).
    pub fn direct_sum(diag: &[C64], shift: usize, n: usize) -> Result<Self> {
        let d = diag.len();
        if shift == 0 {
            let mut mat = CMat::zeros(d, d);
            for (i, x) in diag.iter().enumerate() {
                mat[(i, i)] = *x;
            }
            return Ok(TruncOperator { mat, growth: 0, support: 0, origin: Origin::DirectSum { diag: diag.to_vec(), shift } });
        }
        if n <= d + 3 * shift {
            return invalid(format!("truncation N = {n} too small for {d} diagonal entries and shift {shift}"));
        }
        let mut mat = CMat::zeros(n, n);
        for (i, x) in diag.iter().enumerate() {
            mat[(i, i)] = *x;
        }
        for j in d..n - shift {
            mat[(j + shift, j)] = ONE;
        }
        Ok(TruncOperator { mat, growth: shift, support: d, origin: Origin::DirectSum { diag: diag.to_vec(), shift } })
    }

    /// A finite matrix taken as the whole operator (every column exact).
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return invalid("operator matrix must be square");
        }
        Ok(TruncOperator { mat, growth: 0, support: 0, origin: Origin::Matrix })
    }

    /// Same matrix with a different origin tag; used by constructions that
    /// assemble shift-like operators directly.
    pub fn with_layout(mat: CMat, growth: usize, support: usize) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return invalid("operator matrix must be square");
        }
        Ok(TruncOperator { mat, growth, support, origin: Origin::Matrix })
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn growth(&self) -> usize {
        self.growth
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn exact_window(&self) -> usize {
        self.n().saturating_sub(self.growth + self.support)
    }

    /// Columns on which `(T*T - TT*) T e_n` is computed exactly.
    pub fn trusted_columns(&self) -> Result<usize> {
        let w = self.exact_window();
        let t = w.saturating_sub(2 * self.growth);
        if t == 0 || t < self.support {
            return Err(Error::InsufficientTruncation {
                needed: 2 * self.support + 3 * self.growth + 8,
                have: self.n(),
            });
        }
        Ok(t)
    }

    /// Upper bound for the operator norm used to scale residuals.
    pub fn norm_bound(&self) -> f64 {
        match &self.origin {
            Origin::Shift { .. } => 1.0,
            Origin::PerturbedShift { u, v, .. } => 1.0 + u.norm() * v.norm(),
            Origin::Dim1Cnu { .. } => 1.0,
            Origin::DirectSum { diag, .. } => diag.iter().map(|d| d.norm()).fold(1.0, f64::max),
            Origin::Matrix => linalg::op_norm(&self.mat),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let xv = linalg::CVec::from_column_slice(x);
        (&self.mat * xv).iter().copied().collect()
    }

    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let xv = linalg::CVec::from_column_slice(x);
        (self.mat.adjoint() * xv).iter().copied().collect()
    }

    /// Top-left `w x w` block of `T*T`.
    pub fn gram_window(&self, w: usize) -> CMat {
        let cols = self.mat.columns(0, w);
        linalg::mul_ah(&cols, &cols)
    }
}

#[derive(Debug, Clone)]
pub struct DefectData {
    /// `I - T*T` on the exact window
    pub defect_op: CMat,
    pub defect_rank: usize,
    pub range_basis: Vec<HCoeffVec>,
    pub kernel_dim_in_window: usize,
    /// entrywise gap to the closed form, for rank-one perturbed shifts
    pub closed_form_gap: Option<f64>,
}

/// `-(S_k*u (x) v + v (x) S_k*u + |u|^2 v (x) v)` on the first `w` coordinates.
pub fn closed_form_defect(k: usize, u: &HCoeffVec, v: &HCoeffVec, w: usize) -> CMat {
    let su = u.backward_shift(k).dense(w);
    let vd = v.dense(w);
    let nu = u.norm_sq().0;
    CMat::from_fn(w, w, |i, j| -(su[i] * vd[j].conj() + vd[i] * su[j].conj() + vd[i] * vd[j].conj() * nu))
}

pub fn defect(t: &TruncOperator, tol: &Tolerances) -> DefectData {
    let w = t.exact_window();
    let d = CMat::identity(w, w) - t.gram_window(w);
    let (_, range) = linalg::hermitian_range(&d, tol.rank);
    let range_basis = (0..range.ncols())
        .map(|j| HCoeffVec::polynomial(range.column(j).iter().copied().collect()))
        .collect::<Vec<_>>();
    let closed_form_gap = match t.origin() {
        Origin::PerturbedShift { k, u, v } => Some(linalg::max_abs(&(closed_form_defect(*k, u, v, w) - &d))),
        _ => None,
    };
    DefectData {
        defect_rank: range_basis.len(),
        kernel_dim_in_window: w - range_basis.len(),
        range_basis,
        defect_op: d,
        closed_form_gap,
    }
}

/// `max_n ||(T*T - TT*) T e_n||` over trusted columns (raw, unscaled).
pub fn quasinormal_residual(t: &TruncOperator) -> Result<f64> {
    let cols = t.trusted_columns()?;
    let m = t.matrix();
    let x = m.columns(0, cols).into_owned();
    let tx = linalg::mul(m, &x);
    let y = linalg::mul_ah(m, &tx) - linalg::mul(m, &linalg::mul_ah(m, &x));
    Ok((0..cols).map(|j| y.column(j).norm()).fold(0.0, f64::max))
}

/// Residual divided by `max(1, |T|)^3`.
pub fn scaled_quasinormal_residual(t: &TruncOperator) -> Result<f64> {
    Ok(quasinormal_residual(t)? / t.norm_bound().max(1.0).powi(3))
}

/// Smallest eigenvalue of `T*T - TT*` compressed to the exact window.
pub fn hyponormal_min_eig(t: &TruncOperator) -> Result<f64> {
    t.trusted_columns()?;
    let w = t.exact_window();
    let m = t.matrix();
    let rows = m.rows(0, w);
    let c = t.gram_window(w) - linalg::mul_bh(&rows, &rows);
    Ok(linalg::min_hermitian_eig(&c))
}

/// `||I - T*T||` on the exact window.
pub fn isometry_defect(t: &TruncOperator) -> f64 {
    let w = t.exact_window();
    let vals = linalg::hermitian_eigenvalues(&(CMat::identity(w, w) - t.gram_window(w)));
    vals.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct Polar {
    /// `N x N`, columns past the window are zero
    pub v: CMat,
    /// `(T*T)^{1/2}` on the window, embedded in `N x N`
    pub m: CMat,
    pub window: usize,
    pub round_trip: f64,
}

pub fn polar_decomposition(t: &TruncOperator, tol: &Tolerances) -> Polar {
    let n = t.n();
    let w = t.exact_window();
    let g = t.gram_window(w);
    let mw = linalg::spectral_fn(&g, |l| l.max(0.0).sqrt());
    let pinv = linalg::spectral_fn(&g, |l| {
        let s = l.max(0.0).sqrt();
        if s > tol.rank {
            1.0 / s
        } else {
            0.0
        }
    });
    let tw = t.matrix().columns(0, w).into_owned();
    let vw = linalg::mul(&tw, &pinv);
    let round_trip = linalg::max_abs(&(linalg::mul(&vw, &mw) - &tw));
    let mut v = CMat::zeros(n, n);
    v.view_mut((0, 0), (n, w)).copy_from(&vw);
    let mut m = CMat::zeros(n, n);
    m.view_mut((0, 0), (w, w)).copy_from(&mw);
    Polar { v, m, window: w, round_trip }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn poly(cs: &[f64]) -> HCoeffVec {
        HCoeffVec::polynomial(cs.iter().map(|&x| c(x, 0.0)).collect())
    }

    fn s_minus_z1(n: usize) -> TruncOperator {
        TruncOperator::perturbed_shift(1, &poly(&[0.0, -1.0]), &poly(&[1.0]), n, &Tolerances::default()).unwrap()
    }

    #[test]
    fn shift_examples() {
        let s = TruncOperator::shift(1, 4).unwrap();
        assert_eq!(s.apply(&[ONE, ZERO, ZERO, ZERO]), vec![ZERO, ONE, ZERO, ZERO]);
        let s2 = TruncOperator::shift(2, 5).unwrap();
        assert!(s2.apply_adjoint(&[ZERO, ONE, ZERO, ZERO, ZERO]).iter().all(|z| z.norm() == 0.0));
        let s = TruncOperator::shift(1, 20).unwrap();
        let w = s.exact_window();
        assert_eq!(w, 19);
        assert!(linalg::max_abs(&(s.gram_window(w) - CMat::identity(w, w))) == 0.0);
        assert!(TruncOperator::shift(0, 5).is_err());
    }

    #[test]
    fn perturbed_shift_columns() {
        let t = s_minus_z1(16);
        assert!(t.matrix().column(0).iter().all(|z| z.norm() < 1e-15));
        assert_eq!(t.matrix()[(3, 2)], ONE);
        let t = TruncOperator::perturbed_shift(1, &poly(&[0.0, 1.0]), &poly(&[1.0]), 16, &Tolerances::default()).unwrap();
        assert_eq!(t.matrix()[(1, 0)], c(2.0, 0.0));
        let t = TruncOperator::perturbed_shift(2, &poly(&[0.5, 0.0, -1.0]), &poly(&[1.0]), 16, &Tolerances::default())
            .unwrap();
        assert_eq!(t.matrix()[(0, 0)], c(0.5, 0.0));
        assert_eq!(t.matrix()[(2, 0)], ZERO);
        assert_eq!(t.matrix()[(3, 1)], ONE);
        assert!(TruncOperator::perturbed_shift(1, &poly(&[0.0]), &poly(&[1.0]), 8, &Tolerances::default()).is_err());
    }

    #[test]
    fn defect_examples() {
        let tol = Tolerances::default();
        let d = defect(&TruncOperator::shift(1, 12).unwrap(), &tol);
        assert_eq!(d.defect_rank, 0);
        let d = defect(&s_minus_z1(12), &tol);
        assert_eq!(d.defect_rank, 1);
        assert!((d.defect_op[(0, 0)] - ONE).norm() < 1e-15);
        assert!(d.range_basis[0].coeffs()[0].norm() > 1.0 - 1e-12);
        assert!(d.closed_form_gap.unwrap() < 1e-14);
        let opz = poly(&[1.0, 1.0]);
        let t = TruncOperator::perturbed_shift(1, &opz, &opz, 12, &tol).unwrap();
        let d = defect(&t, &tol);
        assert!(d.closed_form_gap.unwrap() < 1e-14);
        assert_eq!(d.defect_rank, 2);
    }

    #[test]
    fn residual_examples() {
        let r = quasinormal_residual(&s_minus_z1(128)).unwrap();
        assert!(r < 1e-14);
        let t = TruncOperator::perturbed_shift(1, &poly(&[0.0, 1.0]), &poly(&[1.0]), 128, &Tolerances::default()).unwrap();
        assert!(quasinormal_residual(&t).unwrap() > 0.1);
        assert!(hyponormal_min_eig(&t).unwrap() < -1e-3);
        assert!(quasinormal_residual(&TruncOperator::shift(3, 40).unwrap()).unwrap() == 0.0);
        assert!(hyponormal_min_eig(&s_minus_z1(64)).unwrap() >= -1e-12);
        assert!(hyponormal_min_eig(&TruncOperator::shift(1, 64).unwrap()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn residual_needs_room() {
        let t = TruncOperator::shift(3, 8).unwrap();
        assert!(quasinormal_residual(&t).is_err());
    }

    #[test]
    fn polar_examples() {
        let tol = Tolerances::default();
        let s = TruncOperator::shift(1, 20).unwrap();
        let p = polar_decomposition(&s, &tol);
        let w = p.window;
        assert!(linalg::max_abs(&(p.m.view((0, 0), (w, w)) - CMat::identity(w, w))) < 1e-12);
        assert!(linalg::max_abs(&(p.v.columns(0, w) - s.matrix().columns(0, w))) < 1e-12);

        let t = s_minus_z1(20);
        let p = polar_decomposition(&t, &tol);
        assert!(p.m[(0, 0)].norm() < 1e-12 && (p.m[(1, 1)] - ONE).norm() < 1e-12);
        assert!(p.v.column(0).norm() < 1e-12);
        assert!((p.v[(2, 1)] - ONE).norm() < 1e-12);
        assert!(p.round_trip < 100.0 * tol.rank);

        let s2 = TruncOperator::from_matrix(s.matrix() * c(2.0, 0.0)).unwrap();
        let p = polar_decomposition(&s2, &tol);
        assert!((p.m[(3, 3)] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((p.v[(4, 3)] - ONE).norm() < 1e-12);
    }

    #[test]
    fn dim1_layout() {
        let t = TruncOperator::dim1_cnu(&[c(0.3, 0.0), c(0.4, 0.0), ZERO], 20).unwrap();
        assert_eq!(t.matrix()[(0, 0)], c(0.3, 0.0));
        assert_eq!(t.matrix()[(1, 0)], c(0.4, 0.0));
        assert_eq!(t.matrix()[(2, 0)], ZERO);
        assert_eq!(t.matrix()[(3, 1)], ONE);
        assert!(TruncOperator::dim1_cnu(&[c(0.8, 0.0), c(0.7, 0.0)], 20).is_err());
    }
}
