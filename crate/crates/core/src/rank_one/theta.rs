use num_complex::Complex64 as C64;
use serde_json::json;

use crate::blaschke::{blaschke_kernel_product, szego_kernel, BlaschkeProduct};
use crate::error::{invalid, Error, Result};
use crate::hardy::HCoeffVec;
use crate::linalg::{self, CMat, ONE};
use crate::operators::{self, TruncOperator};
use crate::report::{cjson, cmat_json, CheckReport, Classification};
use crate::tol::Tolerances;

use super::{backward, base_report, ip, not_isometry, Parts, DEPENDENCE_ANGLE, DOUBLE_ZERO_TOL};

#[derive(Debug, Clone)]
pub struct Theta {
    pub product: BlaschkeProduct,
    /// `max_n |<theta z^n, x>| / |x|` over `n = 0..5`, `x in {v, S*u}`
    pub orthogonality_residual: f64,
    pub double_zero: bool,
}

impl Theta {
    pub fn degree(&self) -> usize {
        self.product.degree()
    }

    pub fn zeros(&self) -> &[C64] {
        &self.product.zeros
    }
}

/// `Q* S_k* Q` for an orthonormal basis `Q` of `ran(I - T*T)`.
pub fn compressed_backward_shift(p: &Parts, dependent: bool) -> CMat {
    let q = p.defect_basis(dependent);
    let mut sq = CMat::zeros(p.n, q.ncols());
    for j in 0..q.ncols() {
        sq.set_column(j, &backward(&q.column(j).into_owned(), p.k));
    }
    q.adjoint() * sq
}

/// Zeros of `theta` with `ker(I - T*T) = theta H^2`: conjugates of the eigenvalues of
/// the compressed backward shift. Near-coincident pairs are averaged.
pub(crate) fn theta_zeros(p: &Parts) -> Result<(Vec<C64>, bool)> {
    let dependent = p.angle() < DEPENDENCE_ANGLE;
    let m = compressed_backward_shift(p, dependent);
    let eigs: Vec<C64> = if dependent { vec![m[(0, 0)]] } else { linalg::eig2(&m).to_vec() };
    let mut zeros: Vec<C64> = eigs.iter().map(|e| e.conj()).collect();
    if zeros.iter().any(|z| !(z.norm() < 1.0)) {
        return Err(Error::Numerical("compressed backward shift has an eigenvalue outside the disk".into()));
    }
    let mut double = false;
    if zeros.len() == 2 && (zeros[0] - zeros[1]).norm() <= DOUBLE_ZERO_TOL {
        let mean = (zeros[0] + zeros[1]) * 0.5;
        zeros = vec![mean, mean];
        double = true;
    }
    // stable order: by modulus then argument
    zeros.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    Ok((zeros, double))
}

fn orthogonality(theta: &BlaschkeProduct, p: &Parts) -> Result<f64> {
    let th = theta.coefficients(p.n)?;
    let mut worst: f64 = 0.0;
    for n in 0..=5 {
        let f = th.shift_up(n)?;
        for x in [&p.v, &p.w] {
            let nx = x.norm();
            if nx > 0.0 {
                worst = worst.max(ip(&f, x).norm() / nx);
            }
        }
    }
    Ok(worst)
}

/// Inner function with `ker(I - T*T) = theta H^2` for a quasinormal `S + u (x) v`.
pub fn beurling_theta(t: &TruncOperator, tol: &Tolerances) -> Result<Theta> {
    let p = Parts::of(t)?;
    if p.k != 1 {
        return invalid("beurling_theta needs k = 1");
    }
    let oracle = operators::scaled_quasinormal_residual(t)?;
    if oracle > tol.residual {
        return Err(Error::Precondition(format!("theta is only defined for quasinormal instances: not quasinormal (oracle {oracle:.3e})")));
    }
    if operators::isometry_defect(t) <= tol.rank {
        return Ok(Theta {
            product: BlaschkeProduct::new(vec![], ONE)?,
            orthogonality_residual: 0.0,
            double_zero: false,
        });
    }
    let (zeros, double_zero) = theta_zeros(&p)?;
    let product = BlaschkeProduct::new(zeros, ONE)?;
    let orthogonality_residual = orthogonality(&product, &p)?;
    if orthogonality_residual > tol.residual {
        return Err(Error::Numerical(format!(
            "fitted theta fails the orthogonality check (residual {orthogonality_residual:.3e})"
        )));
    }
    Ok(Theta { product, orthogonality_residual, double_zero })
}

fn require_type_branch(p: &Parts) -> Result<()> {
    if p.k != 1 {
        return invalid("Type I / II checks need k = 1");
    }
    if p.angle() < DEPENDENCE_ANGLE {
        return invalid("wrong branch: v and S*u are dependent; use check_dependent");
    }
    Ok(())
}

/// Relative distance of `v` and `S*u` from the span of `basis`.
fn span_residual(p: &Parts, basis: &[HCoeffVec]) -> f64 {
    let mut m = CMat::zeros(p.n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        m.set_column(j, &p.dense(b));
    }
    let q = linalg::orthonormal_columns(&m, 0.0);
    let mut worst: f64 = 0.0;
    for x in [&p.v, &p.w] {
        let d = p.dense(x);
        let nx = d.norm();
        if nx > 0.0 {
            let r = &d - &q * (q.adjoint() * &d);
            worst = worst.max(r.norm() / nx);
        }
    }
    worst
}

fn scaled_normality(b: &CMat) -> f64 {
    linalg::normality_residual(b) / linalg::max_abs(b).max(1.0).powi(2)
}

/// Type I: `ker(I - T*T) = B_alpha^2 H^2`.
pub fn check_type1(t: &TruncOperator, tol: &Tolerances, alpha: Option<C64>) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    require_type_branch(&p)?;
    not_isometry(t, tol)?;
    let mut r = base_report(t, tol)?;
    let alpha = match alpha {
        Some(a) => a,
        None => match theta_zeros(&p) {
            Ok((z, true)) => z[0],
            _ => {
                r.flag("theta_double_zero", 1.0, false);
                r.cert("reason", json!("no double-zero theta"));
                return Ok(r.finish(false, Classification::IndependentTypeI));
            }
        },
    };
    if !(alpha.norm() < 1.0) {
        return invalid("alpha must lie in the open disk");
    }
    let n = p.n;
    let ka = szego_kernel(alpha, n)?;
    let bka = blaschke_kernel_product(alpha, 1, n)?;
    r.condition("1_span", span_residual(&p, &[ka.clone(), bka.clone()]), tol.residual);

    let (va, _) = p.v.evaluate(alpha)?;
    // B_alpha* v (alpha) = <v, B_alpha k_alpha>
    let bsv = ip(&p.v, &bka);
    r.condition("2_value", (va + alpha * bsv).norm(), tol.residual);

    let b2 = BlaschkeProduct::new(vec![alpha, alpha], ONE)?.coefficients(n)?;
    let ub2 = ip(&p.u, &b2);
    r.condition("3_pairing", (bsv.conj() * ub2 + ONE).norm(), tol.residual);

    let u0 = p.u.coeff(0).unwrap_or_default();
    let (sua, _) = p.w.evaluate(alpha)?;
    let rr = sua * (1.0 - alpha.norm_sqr()) - alpha.conj() * u0;
    let (cva, cb) = (va.conj(), bsv.conj());
    let m = CMat::from_row_slice(
        2,
        2,
        &[cva * u0 + alpha * (ONE + cva * rr), cb * u0 + alpha * cb * rr, ONE + cva * rr, cb * rr],
    );
    r.condition("4_matrix_normal", scaled_normality(&m), tol.residual);
    r.cert("alpha", cjson(alpha));
    r.cert("v_alpha", cjson(va));
    r.cert("B_alpha_star_v_alpha", cjson(bsv));
    r.cert("R", cjson(rr));
    r.cert("matrix", cmat_json(&m));
    let ok = r.all_conditions_hold();
    Ok(r.finish(ok, Classification::IndependentTypeI))
}

/// Type II: `ker(I - T*T) = B_alpha B_beta H^2` with `alpha != beta`.
pub fn check_type2(t: &TruncOperator, tol: &Tolerances, zeros: Option<(C64, C64)>) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    require_type_branch(&p)?;
    not_isometry(t, tol)?;
    let (alpha, beta) = match zeros {
        Some(z) => z,
        None => match theta_zeros(&p) {
            Ok((z, false)) if z.len() == 2 => (z[0], z[1]),
            Ok((z, true)) => return check_type1(t, tol, Some(z[0])),
            _ => {
                let mut r = base_report(t, tol)?;
                r.flag("theta_two_zeros", 1.0, false);
                r.cert("reason", json!("no degree-two theta"));
                return Ok(r.finish(false, Classification::IndependentTypeII));
            }
        },
    };
    if (alpha - beta).norm() <= DOUBLE_ZERO_TOL {
        return check_type1(t, tol, Some((alpha + beta) * 0.5));
    }
    if !(alpha.norm() < 1.0 && beta.norm() < 1.0) {
        return invalid("alpha and beta must lie in the open disk");
    }
    let mut r = base_report(t, tol)?;
    let n = p.n;
    let ka = szego_kernel(alpha, n)?;
    let kb = szego_kernel(beta, n)?;
    r.condition("1_span", span_residual(&p, &[ka, kb]), tol.residual);

    let bab = BlaschkeProduct::new(vec![alpha, beta], ONE)?.coefficients(n)?;
    let ub = ip(&p.u, &bab);
    let (va, _) = p.v.evaluate(alpha)?;
    let (vb, _) = p.v.evaluate(beta)?;
    r.condition("2_alpha", (va.conj() * ub - beta.conj()).norm(), tol.residual);
    r.condition("3_beta", (vb.conj() * ub - alpha.conj()).norm(), tol.residual);

    // <f, z - c> = f_1 - conj(c) f_0
    let w0 = p.w.coeff(0).unwrap_or_default();
    let w1 = p.w.coeff(1).unwrap_or_default();
    let den = (alpha - beta).conj();
    let s0 = (w1 - beta.conj() * w0) / den;
    let s1 = -(w1 - alpha.conj() * w0) / den;
    let u0 = p.u.coeff(0).unwrap_or_default();
    let (cva, cvb) = (va.conj(), vb.conj());
    let m_alpha = (alpha.norm() > 0.0).then(|| {
        let a = alpha.conj();
        CMat::from_row_slice(
            2,
            2,
            &[(ONE + cva * s0) / a, cvb * s0 / a, cva * u0 - (ONE + cva * s0) / a, cvb * u0 - cvb * s0 / a],
        )
    });
    let m_beta = (beta.norm() > 0.0).then(|| {
        let b = beta.conj();
        CMat::from_row_slice(
            2,
            2,
            &[cva * u0 - cva * s1 / b, cvb * u0 - (ONE + s1 * cvb) / b, cva * s1 / b, (ONE + cvb * s1) / b],
        )
    });
    let one = C64::new(1.0, 0.0);
    let g = CMat::from_row_slice(
        2,
        2,
        &[
            one / (1.0 - alpha.norm_sqr()),
            one / (one - beta.conj() * alpha),
            one / (one - alpha.conj() * beta),
            one / (1.0 - beta.norm_sqr()),
        ],
    );
    let (gh, ghi) = (linalg::pd_power(&g, 0.5), linalg::pd_power(&g, -0.5));
    let normality = |m: &CMat| scaled_normality(&(&gh * m * &ghi));
    // the form with the larger denominator is better conditioned
    let (m, form) = match (&m_alpha, &m_beta) {
        (Some(ma), Some(mb)) => {
            r.diagnostic("matrix_forms_gap", linalg::max_abs(&(ma - mb)));
            if alpha.norm() >= beta.norm() {
                r.diagnostic("other_form_normality", normality(mb));
                (ma.clone(), "alpha")
            } else {
                r.diagnostic("other_form_normality", normality(ma));
                (mb.clone(), "beta")
            }
        }
        (Some(ma), None) => (ma.clone(), "alpha"),
        (None, Some(mb)) => (mb.clone(), "beta"),
        (None, None) => unreachable!("alpha != beta"),
    };
    r.condition("4_matrix_normal", normality(&m), tol.residual);
    r.diagnostic("4_literal_normality", scaled_normality(&m));
    r.cert("alpha", cjson(alpha));
    r.cert("beta", cjson(beta));
    r.cert("s0", cjson(s0));
    r.cert("s1", cjson(s1));
    r.cert("matrix_form", json!(form));
    r.cert("matrix", cmat_json(&m));
    let ok = r.all_conditions_hold();
    Ok(r.finish(ok, Classification::IndependentTypeII))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn theta_of_s_minus_z1_is_z() {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(-1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![ONE]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 64, &Tolerances::default()).unwrap();
        let th = beurling_theta(&t, &Tolerances::default()).unwrap();
        assert_eq!(th.degree(), 1);
        assert!(th.zeros()[0].norm() < 1e-14);
    }

    #[test]
    fn theta_requires_quasinormal() {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![ONE]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 64, &Tolerances::default()).unwrap();
        assert!(matches!(beurling_theta(&t, &Tolerances::default()), Err(Error::Precondition(_))));
    }
}
