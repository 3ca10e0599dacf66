//! Completely non-unitary contractions with finite defect indices written as
//! `S_k + F` in a basis adapted to the defect spaces.
//!
//! Everything is expressed in the adapted basis `e_1, ..., e_M` with
//! `M = n + k (r_max + 1)`, which is enough room for every `F_r`, `r <= r_max`.

use std::collections::BTreeMap;

use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, ONE};
use crate::operators::{self, TruncOperator};
use crate::report::{cmat_json, CheckReport, Classification};
use crate::tol::Tolerances;

/// Upper end of the bounded search for the multiplier in condition (3).
pub const LAMBDA_CUTOFF: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct CnuFiniteRank {
    /// `dim D_T`
    pub n: usize,
    /// `dim (D_{T*} - D_T)`
    pub k: usize,
    pub r_max: usize,
    /// adapted basis in original coordinates, `N x M`
    pub basis: CMat,
    /// `T` in the adapted basis; the last `k` columns leave the basis and are left zero
    pub t_tilde: CMat,
    pub f1: CMat,
    pub f: CMat,
    /// `fr[r - 1] = F_r`
    pub fr: Vec<CMat>,
    pub containment_residual: f64,
    /// how far `T e_j` leaves the span of the adapted basis
    pub basis_residual: f64,
    /// `|T - (S_k + F)|` on columns that stay inside the basis
    pub split_residual: f64,
    pub oracle_residual: f64,
    pub hyponormal_min_eig: f64,
}

fn projector(m: usize, r: usize) -> CMat {
    CMat::from_fn(m, m, |i, j| if i == j && i < r { ONE } else { linalg::ZERO })
}

fn shift_mat(m: usize, k: usize) -> CMat {
    CMat::from_fn(m, m, |i, j| if i == j + k { ONE } else { linalg::ZERO })
}

fn pad_rows(m: &CMat, n: usize) -> CMat {
    let mut out = CMat::zeros(n, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

pub fn split_cnu(t: &TruncOperator, tol: &Tolerances) -> Result<CnuFiniteRank> {
    let norm = linalg::op_norm(t.matrix());
    if norm > 1.0 + tol.rank {
        return Err(Error::Precondition(format!("not a contraction (norm {norm:.6})")));
    }
    let oracle_residual = operators::scaled_quasinormal_residual(t)?;
    let hyponormal_min_eig = operators::hyponormal_min_eig(t)?;
    let big_n = t.n();
    let w = t.exact_window();
    let zero_tol = 100.0 * tol.rank;

    let (_, qt) = linalg::hermitian_range(&(CMat::identity(w, w) - t.gram_window(w)), tol.rank);
    let qt = pad_rows(&qt, big_n);
    let m = t.matrix();
    let (_, qs) = linalg::hermitian_range(&(CMat::identity(big_n, big_n) - m * m.adjoint()), tol.rank);
    let n = qt.ncols();

    let outside = &qt - &qs * (qs.adjoint() * &qt);
    let mut containment_residual: f64 = 0.0;
    let mut worst = 0;
    for j in 0..n {
        let r = outside.column(j).norm();
        if r > containment_residual {
            containment_residual = r;
            worst = j;
        }
    }
    if containment_residual > zero_tol {
        let v: Vec<String> =
            qt.column(worst).iter().take(8).map(|z| format!("({:.4},{:.4})", z.re, z.im)).collect();
        return Err(Error::Precondition(format!(
            "defect containment fails (residual {containment_residual:.3e}, vector [{} ...])",
            v.join(", ")
        )));
    }
    if qs.ncols() <= n {
        return Err(Error::Precondition("dim(D_T* - D_T) = 0: no shift part".into()));
    }
    let comp = linalg::orthonormal_columns(&(&qs - &qt * (qt.adjoint() * &qs)), 1e-6);
    let k = comp.ncols();
    if n + k != qs.ncols() {
        return Err(Error::Numerical(format!(
            "defect complement has dimension {k}, expected {}",
            qs.ncols() - n
        )));
    }
    let r_max = n + k + 2;
    let dim = n + k * (r_max + 1);
    let tail_of = |col: &CVec| -> f64 { col.rows(w, big_n - w).norm() };

    let mut basis = CMat::zeros(big_n, dim);
    basis.view_mut((0, 0), (big_n, n)).copy_from(&qt);
    basis.view_mut((0, n), (big_n, k)).copy_from(&comp);
    for j in n..dim - k {
        let col: CVec = basis.column(j).into_owned();
        if tail_of(&col) > tol.rank {
            return Err(Error::InsufficientTruncation { needed: big_n + (dim - j) * k.max(t.growth()) + 8, have: big_n });
        }
        let img = m * col;
        basis.set_column(j + k, &img);
    }
    for j in dim - k..dim {
        if tail_of(&basis.column(j).into_owned()) > tol.rank {
            return Err(Error::InsufficientTruncation { needed: big_n + 2 * k + 8, have: big_n });
        }
    }
    let gram_err = linalg::max_abs(&(basis.adjoint() * &basis - CMat::identity(dim, dim)));
    if gram_err > zero_tol {
        return Err(Error::Numerical(format!("adapted basis not orthonormal (error {gram_err:.3e})")));
    }

    let inside = dim - k;
    let tb = m * basis.columns(0, inside);
    let coords = basis.adjoint() * &tb;
    let basis_residual = linalg::max_abs(&(&tb - &basis * &coords));
    let mut t_tilde = CMat::zeros(dim, dim);
    t_tilde.view_mut((0, 0), (dim, inside)).copy_from(&coords);

    let pn = projector(dim, n);
    let sk = shift_mat(dim, k);
    let f1 = &t_tilde * &pn;
    let f = &f1 - &sk * &pn;
    let split = (&sk + &f) - &t_tilde;
    let split_residual = linalg::max_abs(&split.columns(0, inside).into_owned());

    let ip = CMat::identity(dim, dim) - &pn;
    let mut powers = vec![CMat::identity(dim, dim)];
    for r in 1..=r_max {
        let next = &powers[r - 1] * &f1;
        powers.push(next);
    }
    let mut fr = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let mut acc = powers[r].clone();
        let mut sj = CMat::identity(dim, dim);
        for j in 1..r {
            sj = &sk * sj;
            acc += &sj * &ip * &powers[r - j];
        }
        fr.push(acc);
    }
    Ok(CnuFiniteRank {
        n,
        k,
        r_max,
        basis,
        t_tilde,
        f1,
        f,
        fr,
        containment_residual,
        basis_residual,
        split_residual,
        oracle_residual,
        hyponormal_min_eig,
    })
}

/// Minimum of a convex function on `[a, b]` by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

#[derive(Debug, Clone, Default)]
pub struct ConditionSet {
    pub holds: BTreeMap<String, bool>,
    pub residuals: BTreeMap<String, f64>,
    /// witness for condition (3)
    pub lambda: Option<f64>,
}

impl ConditionSet {
    fn put(&mut self, name: &str, residual: f64, holds: bool) {
        self.holds.insert(name.into(), holds);
        self.residuals.insert(name.into(), residual);
    }

    pub fn all_hold(&self) -> bool {
        self.holds.values().all(|&b| b)
    }
}

fn rank_condition(c: &CnuFiniteRank, tol: &Tolerances) -> (f64, bool) {
    let dim = c.f1.nrows();
    let d = projector(dim, c.n) - c.f1.adjoint() * &c.f1;
    let (sv, _) = linalg::svd_full(&d);
    let rank = sv.iter().filter(|&&s| s > tol.rank).count();
    let margin = if c.n == 0 { 0.0 } else { sv[c.n - 1] };
    (margin, rank == c.n)
}

/// Conditions (1)-(4) of the characterization of `S_k + F`.
pub fn check_prop_char(c: &CnuFiniteRank, tol: &Tolerances) -> ConditionSet {
    let mut out = ConditionSet::default();
    let dim = c.f1.nrows();
    let (n, k) = (c.n, c.k);
    let zero_tol = 100.0 * tol.rank;
    let pn = projector(dim, n);
    let pnk = projector(dim, n + k);
    let id = CMat::identity(dim, dim);

    let (margin, ok) = rank_condition(c, tol);
    out.put("1_rank", margin, ok);

    let a = linalg::op_norm(&(&c.f1 * (&id - &pn)));
    out.put("2_right_kernel", a, a <= zero_tol);
    let b = linalg::op_norm(&((&id - &pnk) * &c.f1));
    out.put("2_range_in_P_n+k", b, b <= zero_tol);

    let ff = &c.f1 * c.f1.adjoint() - &pnk;
    let gg = &pn - c.f1.adjoint() * &c.f1;
    let h = |lam: f64| linalg::max_hermitian_eig(&(ff.scale(lam) + &gg));
    let (lam, val) = golden_min(h, 0.0, LAMBDA_CUTOFF, 200);
    out.put("3_lambda_pencil", val, val <= tol.residual);
    out.lambda = Some(lam);

    let mut worst: f64 = f64::NEG_INFINITY;
    let mut stack: Vec<CMat> = Vec::new();
    for (i, fr) in c.fr.iter().enumerate() {
        let r = i + 1;
        let a = fr.adjoint() * fr - &pn;
        let b = fr * fr.adjoint() - projector(dim, (n + k * r).min(dim));
        worst = worst.max(linalg::max_hermitian_eig(&a)).max(linalg::max_hermitian_eig(&b));
        // equality sets restricted to D_T, where P_n x = P_{n+kr} x = x
        stack.push((-a).view((0, 0), (dim, n)).into_owned());
        stack.push((-b).view((0, 0), (dim, n)).into_owned());
    }
    let worst = if c.fr.is_empty() { 0.0 } else { worst.max(0.0) };
    out.put("4_norm_bounds", worst, worst <= tol.residual);
    let common = if n == 0 {
        0
    } else {
        let rows: usize = stack.iter().map(|s| s.nrows()).sum();
        let mut big = CMat::zeros(rows, n);
        let mut at = 0;
        for s in &stack {
            big.view_mut((at, 0), (s.nrows(), n)).copy_from(s);
            at += s.nrows();
        }
        linalg::null_space(&big, tol.rank).ncols()
    };
    out.put("4_common_equality_trivial", common as f64, common == 0);
    out
}

/// The quasinormality criterion for `S_k + F`, cross-checked with the oracle.
pub fn check_cnu_quasinormal(c: &CnuFiniteRank, tol: &Tolerances) -> CheckReport {
    let dim = c.f1.nrows();
    let (n, k) = (c.n, c.k);
    let zero_tol = 100.0 * tol.rank;
    let pn = projector(dim, n);
    let ip = CMat::identity(dim, dim) - &pn;
    let mut rep = CheckReport::new(c.oracle_residual, tol.residual);
    rep.hyponormal_min_eig = Some(c.hyponormal_min_eig);

    let (margin, ok1) = rank_condition(c, tol);
    rep.flag("1_rank", margin, ok1);
    let a = linalg::op_norm(&(&c.f1 * &ip));
    let b = linalg::op_norm(&(&ip * &c.f1));
    let ok2 = rep.condition("2_reducing", a.max(b), zero_tol);
    let nres = linalg::op_norm(&(c.f1.adjoint() * &c.f1 - &c.f1 * c.f1.adjoint()));
    rep.condition("3_F1_normal", nres, tol.residual);
    let mut worst: f64 = 0.0;
    let mut pow = CMat::identity(dim, dim);
    for _ in 0..c.r_max {
        pow = &pow * &c.f1;
        if n > 0 {
            worst = worst.max(linalg::op_norm(&pow.columns(0, n).into_owned()));
        }
    }
    rep.flag("4_strict_contraction", worst, n == 0 || worst < 1.0 - tol.rank);

    let pnk = projector(dim, n + k);
    rep.diagnostic("prop_range_in_P_n+k", linalg::op_norm(&((CMat::identity(dim, dim) - pnk) * &c.f1)));
    rep.diagnostic("split_residual", c.split_residual);
    rep.diagnostic("basis_residual", c.basis_residual);
    rep.diagnostic("containment_residual", c.containment_residual);
    if ok1 && ok2 {
        let mut gap: f64 = 0.0;
        let mut pow = CMat::identity(dim, dim);
        for fr in &c.fr {
            pow = &pow * &c.f1;
            gap = gap.max(linalg::max_abs(&(fr - &pow)));
        }
        rep.diagnostic("reduction_identity", gap);
        let inside = dim - k;
        let off = (&pn * &c.t_tilde * &ip).columns(0, inside).into_owned();
        let off2 = (&ip * &c.t_tilde * &pn).columns(0, inside).into_owned();
        rep.diagnostic("direct_sum_residual", linalg::max_abs(&off).max(linalg::max_abs(&off2)));
    }
    rep.cert("n", json!(n));
    rep.cert("k", json!(k));
    rep.cert("F1_block", cmat_json(&c.f1.view((0, 0), (n + k, n + k)).into_owned()));
    let verdict = rep.all_conditions_hold();
    rep.finish(verdict, Classification::CnuQuasinormal)
}
