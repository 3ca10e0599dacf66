//! Rank-one perturbations `T = S_k + u (x) v` of the shift of multiplicity `k`.

mod dependent;
mod generate;
mod independent;
mod theta;
mod wandering;

pub use dependent::{check_dependent, check_dependent_shift, check_s2_linear};
pub use generate::{
    generate_dependent, generate_dependent_eigen, generate_independent, generate_isometry, generate_type1,
    generate_type2, Generated,
};
pub use independent::{check_independent, independent_invariants, IndependentInvariants};
pub use theta::{beurling_theta, check_type1, check_type2, compressed_backward_shift, Theta};
pub use wandering::{kernel_wandering, WanderingBasis};

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::hardy::HCoeffVec;
use crate::linalg::{self, CMat, CVec};
use crate::operators::{self, Origin, TruncOperator};
use crate::report::{CheckReport, Classification};
use crate::tol::Tolerances;

/// Principal-angle threshold (radians) separating the dependent and independent branches.
pub const DEPENDENCE_ANGLE: f64 = 1e-8;

/// Two Beurling zeros closer than this are treated as a double zero.
pub const DOUBLE_ZERO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Isometry,
    Dependent,
    Independent,
}

/// The pieces of a perturbed shift used by every checker.
#[derive(Debug, Clone)]
pub struct Parts {
    pub k: usize,
    pub u: HCoeffVec,
    pub v: HCoeffVec,
    /// `S_k* u`
    pub w: HCoeffVec,
    pub n: usize,
}

impl Parts {
    pub fn of(t: &TruncOperator) -> Result<Self> {
        match t.origin() {
            Origin::PerturbedShift { k, u, v } => {
                Ok(Parts { k: *k, u: u.clone(), v: v.clone(), w: u.backward_shift(*k), n: t.n() })
            }
            _ => invalid("operator is not a rank-one perturbation of a shift"),
        }
    }

    pub fn dense(&self, f: &HCoeffVec) -> CVec {
        CVec::from_vec(f.dense(self.n))
    }

    /// `P u`, projection onto `span{1, ..., z^{k-1}}`.
    pub fn pu(&self) -> HCoeffVec {
        HCoeffVec::polynomial((0..self.k).map(|i| self.u.coeff(i).unwrap_or_default()).collect())
    }

    pub fn angle(&self) -> f64 {
        principal_angle(&self.v, &self.w)
    }

    /// Orthonormal basis of `span{v}` or `span{v, S_k* u}`.
    pub fn defect_basis(&self, dependent: bool) -> CMat {
        let mut m = CMat::zeros(self.n, if dependent { 1 } else { 2 });
        m.set_column(0, &self.dense(&self.v));
        if !dependent {
            m.set_column(1, &self.dense(&self.w));
        }
        linalg::orthonormal_columns(&m, 0.0)
    }
}

pub fn ip(f: &HCoeffVec, g: &HCoeffVec) -> C64 {
    f.inner(g).0
}

/// Angle between the lines spanned by `f` and `g`; zero when either vanishes.
pub fn principal_angle(f: &HCoeffVec, g: &HCoeffVec) -> f64 {
    let (nf, ng) = (f.norm(), g.norm());
    if nf == 0.0 || ng == 0.0 {
        return 0.0;
    }
    let c = (ip(f, g).norm() / (nf * ng)).min(1.0);
    // asin of the sine is accurate for tiny angles, acos is not
    let s = (1.0 - c * c).max(0.0).sqrt();
    let gf = ip(g, f) / (nf * nf);
    let perp = g.sub(&f.scale(gf)).map(|r| r.norm() / ng).unwrap_or(s);
    perp.min(1.0).asin()
}

/// `S_k*` on a dense column.
pub fn backward(x: &CVec, k: usize) -> CVec {
    let n = x.len();
    CVec::from_fn(n, |i, _| if i + k < n { x[i + k] } else { C64::new(0.0, 0.0) })
}

/// `S_k` on a dense column (truncating at the end).
pub fn forward(x: &CVec, k: usize) -> CVec {
    let n = x.len();
    CVec::from_fn(n, |i, _| if i >= k { x[i - k] } else { C64::new(0.0, 0.0) })
}

pub fn to_hvec(x: &CVec) -> HCoeffVec {
    let mut c: Vec<C64> = x.iter().copied().collect();
    while c.last().is_some_and(|z| z.norm() == 0.0) {
        c.pop();
    }
    HCoeffVec::polynomial(c)
}

pub fn branch_of(t: &TruncOperator, tol: &Tolerances) -> Result<Branch> {
    let p = Parts::of(t)?;
    if operators::isometry_defect(t) <= tol.rank {
        return Ok(Branch::Isometry);
    }
    Ok(if p.angle() < DEPENDENCE_ANGLE { Branch::Dependent } else { Branch::Independent })
}

pub(crate) fn base_report(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let mut r = CheckReport::new(operators::scaled_quasinormal_residual(t)?, tol.residual);
    r.hyponormal_min_eig = Some(operators::hyponormal_min_eig(t)?);
    Ok(r)
}

pub(crate) fn not_isometry(t: &TruncOperator, tol: &Tolerances) -> Result<()> {
    if operators::isometry_defect(t) <= tol.rank {
        return Err(Error::Precondition("operator is an isometry (quasinormal, no branch condition applies)".into()));
    }
    Ok(())
}

fn run_branch(t: &TruncOperator, tol: &Tolerances, b: Branch) -> Result<CheckReport> {
    match b {
        Branch::Dependent => {
            let p = Parts::of(t)?;
            let mut r = check_dependent(t, tol)?;
            if p.k == 1 {
                let s = check_dependent_shift(t, tol)?;
                r.diagnostic("dependent_shift_verdict", f64::from(u8::from(s.verdict)));
                if s.verdict != r.verdict && r.consistency_alarm.is_none() {
                    r.consistency_alarm = Some("k = 1 shortcut disagrees with the dependent-branch check".into());
                }
                for (key, val) in &s.certificate {
                    r.certificate.insert(format!("shift_{key}"), val.clone());
                }
            }
            if p.k == 2 && p.v.mass_beyond(2) <= tol.tail {
                let s = check_s2_linear(t, tol)?;
                r.diagnostic("s2_linear_verdict", f64::from(u8::from(s.verdict)));
                if s.verdict != r.verdict && r.consistency_alarm.is_none() {
                    r.consistency_alarm = Some("linear-v shortcut disagrees with the dependent-branch check".into());
                }
            }
            Ok(r)
        }
        Branch::Independent => check_independent(t, tol),
        Branch::Isometry => {
            let mut r = base_report(t, tol)?;
            r.condition("isometry_defect", operators::isometry_defect(t), tol.rank);
            let ok = r.all_conditions_hold();
            Ok(r.finish(ok, Classification::Isometry))
        }
    }
}

/// Full routing: isometry, dependent or independent branch, Type I / II refinement for `k = 1`.
pub fn check(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    if p.u.norm() == 0.0 || p.v.norm() == 0.0 {
        return invalid("u and v must be nonzero");
    }
    let b = branch_of(t, tol)?;
    let angle = p.angle();
    let mut r = run_branch(t, tol, b)?;
    r.diagnostic("principal_angle", angle);
    if b != Branch::Isometry && angle > DEPENDENCE_ANGLE / 10.0 && angle < DEPENDENCE_ANGLE * 10.0 {
        let other = if b == Branch::Dependent { Branch::Independent } else { Branch::Dependent };
        r.diagnostic("borderline_both_branches", 1.0);
        if let Ok(o) = run_branch(t, tol, other) {
            if o.verdict != r.verdict && r.consistency_alarm.is_none() {
                r.consistency_alarm = Some("borderline instance: branches disagree".into());
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn op(k: usize, u: Vec<C64>, v: Vec<C64>, n: usize) -> TruncOperator {
        TruncOperator::perturbed_shift(k, &HCoeffVec::polynomial(u), &HCoeffVec::polynomial(v), n, &Tolerances::default())
            .unwrap()
    }

    #[test]
    fn named_examples_route() {
        let tol = Tolerances::default();
        let t = op(1, vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0)], 128);
        let r = check(&t, &tol).unwrap();
        assert!(r.verdict && r.classification == Classification::Dependent);
        assert!(r.oracle_residual <= 1e-8 && r.consistency_alarm.is_none());

        let t = op(1, vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0)], 128);
        let r = check(&t, &tol).unwrap();
        assert!(!r.verdict && r.consistency_alarm.is_none());
        assert!(r.hyponormal_min_eig.unwrap() < -1e-3);
    }

    #[test]
    fn angle_is_accurate_for_nearly_parallel() {
        let f = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let g = HCoeffVec::polynomial(vec![c(1.0, 0.0), c(1e-10, 0.0)]);
        assert!((principal_angle(&f, &g) - 1e-10).abs() < 1e-15);
        assert_eq!(principal_angle(&f, &HCoeffVec::zero(0)), 0.0);
    }

    #[test]
    fn isometry_routes_first() {
        // S + (e^{it} - 1)/3 (1 + z + z^2) (x) (1 + z), with u normalized
        let s3 = 3f64.sqrt();
        let e = c(0.0, 1.1).exp();
        let u = vec![c(1.0 / s3, 0.0); 3];
        let v = vec![(e - 1.0) / s3, (e - 1.0) / s3];
        let t = op(1, u, v, 64);
        let r = check(&t, &Tolerances::default()).unwrap();
        assert!(r.verdict && r.classification == Classification::Isometry);
    }
}
