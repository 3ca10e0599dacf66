//! Spectral analysis of `(T*T)^{1/2}` for isometry-plus-compact operators and
//! the diagonal-plus-isometry normal form of quasinormal ones.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, ONE};
use crate::operators::{self, TruncOperator};
use crate::report::{CheckReport, Classification};
use crate::tol::Tolerances;

#[derive(Debug, Clone)]
pub struct ModulusGroup {
    pub beta: f64,
    pub multiplicity: usize,
    /// orthonormal eigenvectors (window coordinates, as columns)
    pub basis: CMat,
}

#[derive(Debug, Clone)]
pub struct ModulusSpectrum {
    /// non-unital groups, ascending in `beta`
    pub groups: Vec<ModulusGroup>,
    /// eigenvalue-1 multiplicity counted in window coordinates
    pub unital_dim: usize,
    pub unital_basis: CMat,
    pub kernel_dim: usize,
    pub window: usize,
}

/// Single-linkage clusters of sorted values with gap `> width` between clusters.
pub fn cluster_sorted(vals: &[f64], width: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > width {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

pub fn modulus_spectrum(t: &TruncOperator, tol: &Tolerances) -> Result<ModulusSpectrum> {
    let w = t.exact_window();
    if w == 0 {
        return Err(Error::InsufficientTruncation { needed: t.n() + 1, have: t.n() });
    }
    let g = t.gram_window(w);
    // defect columns must have died out before the window edge
    let edge = (t.growth().max(4)).min(w);
    if t.growth() > 0 {
        let d = CMat::identity(w, w) - &g;
        let worst = (w - edge..w).map(|j| d.column(j).norm()).fold(0.0, f64::max);
        if worst > tol.rank {
            return Err(Error::Precondition(format!(
                "not compact-perturbation-like at this truncation (edge defect {worst:.3e})"
            )));
        }
    }
    let (lam, q) = linalg::hermitian_eigen(&g);
    let beta: Vec<f64> = lam.iter().map(|l| l.max(0.0).sqrt()).collect();
    let mut unital = Vec::new();
    let mut rest = Vec::new();
    for (i, b) in beta.iter().enumerate() {
        if (b - 1.0).abs() <= tol.group {
            unital.push(i);
        } else {
            rest.push(i);
        }
    }
    let vals: Vec<f64> = rest.iter().map(|&i| beta[i]).collect();
    let mut groups = Vec::new();
    for r in cluster_sorted(&vals, tol.group) {
        let idx = &rest[r.clone()];
        let mean = idx.iter().map(|&i| beta[i]).sum::<f64>() / idx.len() as f64;
        let mut basis = CMat::zeros(w, idx.len());
        for (j, &i) in idx.iter().enumerate() {
            basis.set_column(j, &q.column(i));
        }
        groups.push(ModulusGroup { beta: mean, multiplicity: idx.len(), basis });
    }
    let mut unital_basis = CMat::zeros(w, unital.len());
    for (j, &i) in unital.iter().enumerate() {
        unital_basis.set_column(j, &q.column(i));
    }
    let kernel_dim = groups.iter().filter(|g| g.beta <= tol.group).map(|g| g.multiplicity).sum();
    Ok(ModulusSpectrum { groups, unital_dim: unital.len(), unital_basis, kernel_dim, window: w })
}

#[derive(Debug, Clone)]
pub struct DiagIsometryForm {
    /// `beta_n e^{i t_j}`, grouped by ascending modulus, ascending phase in `[0, 2 pi)` inside a group
    pub diag_entries: Vec<C64>,
    pub moduli: Vec<(f64, usize)>,
    pub c_flag: u8,
    pub diag_basis: CMat,
    pub isometry_basis: CMat,
    /// max of the block checks: `T Q_d = Q_d D`, `Q_d^* T Q_1 = 0`, `(T Q_1)^*(T Q_1) = I`
    pub conjugation_residual: f64,
    /// worst `||V Q - Q (Q^* V Q)||` over non-unital eigenspaces
    pub invariance_residual: f64,
    pub oracle_residual: f64,
}

fn phase_angle(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

fn pad_rows(m: &CMat, n: usize) -> CMat {
    let mut out = CMat::zeros(n, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

pub fn extract_decomposition(t: &TruncOperator, tol: &Tolerances) -> Result<DiagIsometryForm> {
    let oracle = operators::scaled_quasinormal_residual(t)?;
    if oracle > tol.residual {
        return Err(Error::Precondition(format!("operator is not quasinormal (residual {oracle:.3e})")));
    }
    let spec = modulus_spectrum(t, tol)?;
    let n = t.n();
    let w = spec.window;
    let polar = operators::polar_decomposition(t, tol);
    let v = polar.v.columns(0, w).into_owned();
    let tw = t.matrix().columns(0, w).into_owned();

    let mut entries = Vec::new();
    let mut moduli = Vec::new();
    let mut dcols: Vec<CVec> = Vec::new();
    let mut invariance: f64 = 0.0;
    for g in &spec.groups {
        let qn = pad_rows(&g.basis, n);
        let (vals, vecs) = if g.beta > tol.group {
            let vq = &v * &g.basis;
            let u = qn.adjoint() * &vq;
            invariance = invariance.max(linalg::max_abs(&(vq - &qn * &u)));
            let (ev, ve) = linalg::normal_eigen(&u);
            (ev.iter().map(|e| e * g.beta).collect::<Vec<_>>(), ve)
        } else {
            (vec![C64::new(0.0, 0.0); g.multiplicity], CMat::identity(g.multiplicity, g.multiplicity))
        };
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| phase_angle(vals[a]).total_cmp(&phase_angle(vals[b])));
        for &i in &order {
            entries.push(vals[i]);
            dcols.push(&g.basis * vecs.column(i));
        }
        moduli.push((g.beta, g.multiplicity));
    }
    let mut qd = CMat::zeros(w, dcols.len());
    for (j, col) in dcols.iter().enumerate() {
        qd.set_column(j, col);
    }
    let q1 = spec.unital_basis.clone();

    let d = CMat::from_diagonal(&CVec::from_vec(entries.clone()));
    let tqd = &tw * &qd;
    let mut resid = linalg::max_abs(&(&tqd - pad_rows(&qd, n) * &d));
    if q1.ncols() > 0 {
        let tq1 = &tw * &q1;
        resid = resid.max(linalg::max_abs(&(tq1.adjoint() * &tq1 - CMat::identity(q1.ncols(), q1.ncols()))));
        if qd.ncols() > 0 {
            resid = resid.max(linalg::max_abs(&(pad_rows(&qd, n).adjoint() * &tq1)));
        }
    }
    Ok(DiagIsometryForm {
        diag_entries: entries,
        moduli,
        c_flag: u8::from(spec.unital_dim > 0),
        diag_basis: qd,
        isometry_basis: q1,
        conjugation_residual: resid,
        invariance_residual: invariance,
        oracle_residual: oracle,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum IsometryKind {
    None,
    Shift(usize),
    Given(CMat),
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub op: TruncOperator,
    /// `U_P (+) c U`
    pub isometry_part: CMat,
    /// `diag(entries - phases) (+) 0`
    pub compact_part: CMat,
    pub residual: f64,
}

fn unit_phase(z: C64) -> C64 {
    if z.norm() == 0.0 {
        ONE
    } else {
        z / z.norm()
    }
}

pub fn synthesize(diag_entries: &[C64], iso: &IsometryKind, n: usize) -> Result<Synthesized> {
    let d = diag_entries.len();
    let op = match iso {
        IsometryKind::None => TruncOperator::direct_sum(diag_entries, 0, d)?,
        IsometryKind::Shift(k) => TruncOperator::direct_sum(diag_entries, *k, n)?,
        IsometryKind::Given(u) => {
            let m = u.nrows();
            if u.ncols() != m || linalg::max_abs(&(u.adjoint() * u - CMat::identity(m, m))) > 1e-10 {
                return Err(Error::InvalidInput("given isometry block must be a unitary matrix".into()));
            }
            let mut mat = CMat::zeros(d + m, d + m);
            for (i, x) in diag_entries.iter().enumerate() {
                mat[(i, i)] = *x;
            }
            mat.view_mut((d, d), (m, m)).copy_from(u);
            TruncOperator::from_matrix(mat)?
        }
    };
    let size = op.n();
    let mut isometry_part = op.matrix().clone();
    let mut compact_part = CMat::zeros(size, size);
    for (i, x) in diag_entries.iter().enumerate() {
        let p = unit_phase(*x);
        isometry_part[(i, i)] = p;
        compact_part[(i, i)] = x - p;
    }
    let residual = operators::scaled_quasinormal_residual(&op)?;
    Ok(Synthesized { op, isometry_part, compact_part, residual })
}

/// `||P_M T - T P_M||` over trusted columns, `basis` in window coordinates.
pub fn commutation_residual(t: &TruncOperator, basis: &CMat) -> Result<f64> {
    let cols = t.trusted_columns()?;
    let n = t.n();
    let r = pad_rows(basis, n);
    let x = t.matrix().columns(0, cols).into_owned();
    let pt = &r * (r.adjoint() * &x);
    let tp = t.matrix() * &r * r.adjoint().columns(0, cols);
    Ok(linalg::max_abs(&(pt - tp)))
}

/// A nontrivial proper reducing subspace of a non-isometric quasinormal
/// isometry-plus-compact operator; `Ok(None)` when no candidate verifies.
pub fn reducing_subspace(t: &TruncOperator, tol: &Tolerances) -> Result<Option<CMat>> {
    let oracle = operators::scaled_quasinormal_residual(t)?;
    if oracle > tol.residual {
        return Err(Error::Precondition(format!("operator is not quasinormal (residual {oracle:.3e})")));
    }
    if operators::isometry_defect(t) <= tol.rank {
        return Err(Error::Precondition("operator is an isometry".into()));
    }
    let w = t.exact_window();
    let accept = |b: &CMat| -> Result<bool> {
        Ok(b.ncols() > 0 && b.ncols() < w && commutation_residual(t, b)? <= 100.0 * tol.rank)
    };
    let d = operators::defect(t, tol);
    let (_, range) = linalg::hermitian_range(&d.defect_op, tol.rank);
    if accept(&range)? {
        return Ok(Some(range));
    }
    let spec = modulus_spectrum(t, tol)?;
    for g in &spec.groups {
        if accept(&g.basis)? {
            return Ok(Some(g.basis.clone()));
        }
    }
    Ok(None)
}

/// `T = V |T|` is quasinormal exactly when `V` maps every eigenspace of `|T|`
/// into itself, which is what makes `T` unitarily `D (+) c U`.
pub fn check_polar_commutation(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let mut r = CheckReport::new(operators::scaled_quasinormal_residual(t)?, tol.residual);
    r.hyponormal_min_eig = Some(operators::hyponormal_min_eig(t)?);
    let spec = modulus_spectrum(t, tol)?;
    let n = t.n();
    let w = spec.window;
    let polar = operators::polar_decomposition(t, tol);
    let v = polar.v.columns(0, w).into_owned();
    let mut invariance: f64 = 0.0;
    for g in spec.groups.iter().filter(|g| g.beta > tol.group) {
        let qn = pad_rows(&g.basis, n);
        let vq = &v * &g.basis;
        invariance = invariance.max(linalg::max_abs(&(&vq - &qn * (qn.adjoint() * &vq))));
    }
    r.condition("eigenspace_invariance", invariance, tol.residual);
    let mut leak: f64 = 0.0;
    if spec.unital_dim > 0 {
        let vq1 = &v * &spec.unital_basis;
        for g in &spec.groups {
            leak = leak.max(linalg::max_abs(&(pad_rows(&g.basis, n).adjoint() * &vq1)));
        }
    }
    r.condition("unital_part_orthogonal", leak, tol.residual);
    r.diagnostic("polar_round_trip", polar.round_trip);
    r.cert("moduli", serde_json::json!(spec.groups.iter().map(|g| (g.beta, g.multiplicity)).collect::<Vec<_>>()));
    r.cert("unital_dim", serde_json::json!(spec.unital_dim));
    let ok = r.all_conditions_hold();
    Ok(r.finish(ok, Classification::DiagonalPlusIsometry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::HCoeffVec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn s_minus_z1(n: usize) -> TruncOperator {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(-1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        TruncOperator::perturbed_shift(1, &u, &v, n, &Tolerances::default()).unwrap()
    }

    #[test]
    fn spectrum_examples() {
        let tol = Tolerances::default();
        let s = modulus_spectrum(&s_minus_z1(40), &tol).unwrap();
        assert_eq!(s.groups.len(), 1);
        assert!(s.groups[0].beta < 1e-7);
        assert_eq!(s.kernel_dim, 1);
        assert_eq!(s.unital_dim, s.window - 1);

        let s = modulus_spectrum(&TruncOperator::shift(2, 30).unwrap(), &tol).unwrap();
        assert!(s.groups.is_empty());

        let t = synthesize(&[c(0.5, 0.0)], &IsometryKind::Shift(1), 30).unwrap().op;
        let s = modulus_spectrum(&t, &tol).unwrap();
        assert_eq!(s.groups.len(), 1);
        assert!((s.groups[0].beta - 0.5).abs() < 1e-12);
        assert_eq!(s.kernel_dim, 0);
    }

    #[test]
    fn extract_examples() {
        let tol = Tolerances::default();
        let f = extract_decomposition(&s_minus_z1(40), &tol).unwrap();
        assert_eq!(f.diag_entries.len(), 1);
        assert!(f.diag_entries[0].norm() < 1e-7);
        assert_eq!(f.c_flag, 1);
        assert!(f.conjugation_residual < 100.0 * tol.rank);

        let e = c(0.0, std::f64::consts::FRAC_PI_3).exp() * 0.5;
        let t = synthesize(&[e], &IsometryKind::Shift(1), 40).unwrap().op;
        let f = extract_decomposition(&t, &tol).unwrap();
        assert!((f.diag_entries[0] - e).norm() < 1e-10);

        let t = synthesize(&[c(0.5, 0.0), c(1.0 / 3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], &IsometryKind::Shift(1), 40)
            .unwrap()
            .op;
        let f = extract_decomposition(&t, &tol).unwrap();
        let mods: Vec<usize> = f.moduli.iter().map(|m| m.1).collect();
        assert_eq!(mods, vec![2, 1, 1]);
        assert!(f.conjugation_residual < 100.0 * tol.rank);
    }

    #[test]
    fn extract_rejects_non_quasinormal() {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 40, &Tolerances::default()).unwrap();
        assert!(matches!(extract_decomposition(&t, &Tolerances::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn synthesize_examples() {
        let s = synthesize(&[], &IsometryKind::Shift(1), 20).unwrap();
        assert!(linalg::max_abs(&s.compact_part) == 0.0);
        let s = synthesize(&[c(0.5, 0.0)], &IsometryKind::Shift(1), 20).unwrap();
        assert!(s.residual <= 1e-8);
        assert!((s.compact_part[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!(linalg::max_abs(&(&s.isometry_part + &s.compact_part - s.op.matrix())) < 1e-15);
        let u = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), ONE, ONE, c(0.0, 0.0)]);
        let s = synthesize(&[c(0.2, 0.1)], &IsometryKind::Given(u), 0).unwrap();
        assert_eq!(s.op.n(), 3);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn reducing_examples() {
        let tol = Tolerances::default();
        let m = reducing_subspace(&s_minus_z1(40), &tol).unwrap().unwrap();
        assert_eq!(m.ncols(), 1);
        assert!((m[(0, 0)].norm() - 1.0).abs() < 1e-12);
        let t = synthesize(&[c(0.0, 0.0), c(0.0, 0.5).exp() * 0.5], &IsometryKind::Shift(1), 40).unwrap().op;
        let m = reducing_subspace(&t, &tol).unwrap().unwrap();
        assert!(commutation_residual(&t, &m).unwrap() < 1e-8);
        assert!(reducing_subspace(&TruncOperator::shift(1, 30).unwrap(), &tol).is_err());
    }

    #[test]
    fn polar_commutation_examples() {
        let tol = Tolerances::default();
        let r = check_polar_commutation(&s_minus_z1(40), &tol).unwrap();
        assert!(r.verdict && r.consistency_alarm.is_none());
        let t = synthesize(&[c(0.5, 0.0), c(0.0, 0.3), c(0.3, 0.0)], &IsometryKind::Shift(2), 40).unwrap().op;
        assert!(check_polar_commutation(&t, &tol).unwrap().verdict);
        let mut m = t.matrix().clone();
        m[(0, 1)] = c(0.2, 0.0);
        let bad = TruncOperator::with_layout(m, 2, 3).unwrap();
        let r = check_polar_commutation(&bad, &tol).unwrap();
        assert!(!r.verdict && r.consistency_alarm.is_none());
        // a nilpotent block leaks the unital part into the kernel
        let mut m = CMat::zeros(30, 30);
        m[(0, 1)] = ONE;
        for j in 2..29 {
            m[(j + 1, j)] = ONE;
        }
        let r = check_polar_commutation(&TruncOperator::with_layout(m, 1, 2).unwrap(), &tol).unwrap();
        assert!(!r.verdict && !r.conditions_hold["unital_part_orthogonal"]);
    }

    #[test]
    fn clustering_is_single_linkage() {
        let r = cluster_sorted(&[0.1, 0.1 + 5e-8, 0.1 + 1e-7, 0.5], 1e-7);
        assert_eq!(r, vec![0..3, 3..4]);
    }
}
