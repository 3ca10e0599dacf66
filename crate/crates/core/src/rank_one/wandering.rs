use crate::error::{Error, Result};
use crate::hardy::HCoeffVec;
use crate::linalg::{self, CMat, ONE};
use crate::operators::{self, TruncOperator};
use crate::tol::Tolerances;

use super::{backward, forward, to_hvec, Parts, DEPENDENCE_ANGLE};

#[derive(Debug, Clone)]
pub struct WanderingBasis {
    pub generators: Vec<HCoeffVec>,
    pub m: usize,
    /// orthonormal basis of `ran(I - T*T)` (closed form), as columns
    pub range_basis: CMat,
    /// `|(I - Q Q*) S_k* Q|` for the range basis `Q`
    pub invariance_residual: f64,
    pub kernel_dim_window: usize,
}

impl WanderingBasis {
    /// Orthonormal basis of `ker(I - T*T)` on the first `w` coordinates.
    pub fn kernel_basis(&self, w: usize) -> CMat {
        let q = self.range_basis.rows(0, w).into_owned();
        linalg::null_space(&q.adjoint(), 1e-10)
    }
}

/// `ker(I - T*T) - S_k ker(I - T*T)` computed as
/// `(span{1, ..., z^{k-1}} + z^k D) - D` with `D = ran(I - T*T)`.
pub fn kernel_wandering(t: &TruncOperator, tol: &Tolerances) -> Result<WanderingBasis> {
    let p = Parts::of(t)?;
    let n = t.n();
    let k = p.k;
    let window = t.exact_window();
    if operators::isometry_defect(t) <= tol.rank {
        let generators = (0..k).map(HCoeffVec::monomial).collect();
        return Ok(WanderingBasis {
            generators,
            m: k,
            range_basis: CMat::zeros(n, 0),
            invariance_residual: 0.0,
            kernel_dim_window: window,
        });
    }
    let q = p.defect_basis(p.angle() < DEPENDENCE_ANGLE);
    let d = q.ncols();
    let mut sq = CMat::zeros(n, d);
    for j in 0..d {
        sq.set_column(j, &backward(&q.column(j).into_owned(), k));
    }
    let invariance_residual = linalg::max_abs(&(&sq - &q * (q.adjoint() * &sq)));
    if invariance_residual > tol.residual {
        return Err(Error::NotInvariant { residual: invariance_residual });
    }
    let mut x = CMat::zeros(n, k + d);
    for i in 0..k {
        x[(i, i)] = ONE;
    }
    for j in 0..d {
        x.set_column(k + j, &forward(&q.column(j).into_owned(), k));
    }
    let y = &x - &q * (q.adjoint() * &x);
    let g = linalg::orthonormal_columns(&y, 1e-6);
    if g.ncols() > k {
        return Err(Error::Numerical(format!(
            "consistency alarm: {} wandering generators for k = {k}; tolerances are misconfigured",
            g.ncols()
        )));
    }
    let generators = (0..g.ncols()).map(|j| to_hvec(&g.column(j).into_owned())).collect();
    Ok(WanderingBasis {
        generators,
        m: g.ncols(),
        range_basis: q,
        invariance_residual,
        kernel_dim_window: window.saturating_sub(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn s_minus_z1_has_generator_z() {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(-1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 64, &Tolerances::default()).unwrap();
        let w = kernel_wandering(&t, &Tolerances::default()).unwrap();
        assert_eq!(w.m, 1);
        let g = &w.generators[0];
        assert!((g.coeff(1).unwrap().norm() - 1.0).abs() < 1e-14);
        assert!(g.coeff(0).unwrap().norm() < 1e-14);
    }

    #[test]
    fn s2_example_has_two_generators() {
        let u = HCoeffVec::polynomial(vec![c(0.5, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let t = TruncOperator::perturbed_shift(2, &u, &v, 64, &Tolerances::default()).unwrap();
        let w = kernel_wandering(&t, &Tolerances::default()).unwrap();
        assert_eq!(w.m, 2);
    }

    #[test]
    fn isometry_convention() {
        let t = TruncOperator::shift(3, 40).unwrap();
        // not a perturbed shift
        assert!(kernel_wandering(&t, &Tolerances::default()).is_err());
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(-2.0, 0.0)]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 40, &Tolerances::default()).unwrap();
        let w = kernel_wandering(&t, &Tolerances::default()).unwrap();
        assert_eq!(w.m, 1);
        assert_eq!(w.generators[0], HCoeffVec::monomial(0));
    }

    #[test]
    fn non_invariant_defect_is_reported() {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(0.3, 0.0), c(0.2, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 64, &Tolerances::default()).unwrap();
        assert!(matches!(kernel_wandering(&t, &Tolerances::default()), Err(Error::NotInvariant { .. })));
    }
}
