use num_complex::Complex64 as C64;
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::hardy::HCoeffVec;
use crate::linalg::ONE;
use crate::operators::TruncOperator;
use crate::report::{cjson, cvec_json, CheckReport, Classification};
use crate::tol::Tolerances;

use super::{base_report, ip, kernel_wandering, not_isometry, Parts, DEPENDENCE_ANGLE};

fn require_dependent(p: &Parts) -> Result<()> {
    if p.angle() >= 10.0 * DEPENDENCE_ANGLE {
        return invalid("wrong branch: v and S_k*u are independent; use check_independent");
    }
    Ok(())
}

/// `v` is an `S_k*`-eigenvector and, for every wandering generator `g_i`,
/// `(1 + <S_k*u, v>) <z^k v, g_i> + |v|^2 sum_{n<k} <u, z^n><z^n, g_i> = 0`.
pub fn check_dependent(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    require_dependent(&p)?;
    not_isometry(t, tol)?;
    let mut r = base_report(t, tol)?;
    let nv = p.v.norm_sq().0;
    let sv = p.v.backward_shift(p.k);
    let lambda = ip(&sv, &p.v) / nv;
    let eig_res = sv.sub(&p.v.scale(lambda))?.norm() / nv.sqrt();
    r.condition("v_eigenvector", eig_res, tol.residual);
    r.cert("eigenvalue", cjson(lambda));
    r.diagnostic("eigenvalue_modulus", lambda.norm());

    let wv = ip(&p.w, &p.v);
    r.cert("r", cjson(wv / nv));
    let pu = p.pu();
    r.cert("Pu", cvec_json(pu.coeffs()));
    match kernel_wandering(t, tol) {
        Ok(wb) => {
            let zkv = p.v.shift_up(p.k)?;
            let mut worst: f64 = 0.0;
            for g in &wb.generators {
                let val = (ONE + wv) * ip(&zkv, g) + ip(&pu, g) * nv;
                worst = worst.max(val.norm());
            }
            r.condition("rel_dependent", worst, tol.residual);
            r.cert("m", json!(wb.m));
            r.cert(
                "generators",
                json!(wb.generators.iter().map(|g| cvec_json(&g.dense(2 * p.k + 4))).collect::<Vec<_>>()),
            );
        }
        Err(Error::NotInvariant { residual }) => {
            r.flag("rel_dependent", residual, false);
            r.cert("kernel", json!("not S_k-invariant"));
        }
        Err(e) => return Err(e),
    }
    let ok = r.all_conditions_hold();
    Ok(r.finish(ok, Classification::Dependent))
}

/// `k = 1`: `v` is a multiple of `k_alpha` and
/// `1 + conj(v(alpha)) (1 - |alpha|^2) S*u(alpha) = conj(alpha) conj(v(alpha)) u(0)`.
pub fn check_dependent_shift(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    if p.k != 1 {
        return invalid("check_dependent_shift needs k = 1");
    }
    require_dependent(&p)?;
    not_isometry(t, tol)?;
    let mut r = base_report(t, tol)?;
    let v0 = p.v.coeff(0).unwrap_or_default();
    let v1 = p.v.coeff(1).unwrap_or_default();
    let vn = p.v.norm();
    if v0.norm() <= tol.rank * vn {
        r.flag("kernel_fit", 1.0, false);
        r.cert("reason", json!("v(0) = 0: v is not a multiple of a Szego kernel"));
        return Ok(r.finish(false, Classification::Dependent));
    }
    let alpha = (v1 / v0).conj();
    if alpha.norm() >= 1.0 {
        r.flag("kernel_fit", alpha.norm(), false);
        r.cert("reason", json!("fitted alpha outside the disk"));
        return Ok(r.finish(false, Classification::Dependent));
    }
    let ka = HCoeffVec::szego(alpha, p.n)?;
    let fit = p.v.sub(&ka.scale(v0))?.norm() / vn;
    r.condition("kernel_fit", fit, tol.residual);
    let (va, _) = p.v.evaluate(alpha)?;
    let (sua, _) = p.w.evaluate(alpha)?;
    let u0 = p.u.coeff(0).unwrap_or_default();
    let a2 = 1.0 - alpha.norm_sqr();
    let identity = ONE + va.conj() * sua * a2 - alpha.conj() * va.conj() * u0;
    r.condition("kernel_identity", identity.norm(), tol.residual);
    let rr = sua * a2 - alpha.conj() * u0;
    r.cert("alpha", cjson(alpha));
    r.cert("v_alpha", cjson(va));
    r.cert("R", cjson(rr));
    let ok = r.all_conditions_hold();
    Ok(r.finish(ok, Classification::Dependent))
}

/// `k = 2`, `v = a + b z`: `<S*^2 u, v> = -1` and `<u, z> v(0) - <v, z> u(0) = 0`.
pub fn check_s2_linear(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    if p.k != 2 {
        return invalid("check_s2_linear needs k = 2");
    }
    if p.v.mass_beyond(2) > tol.tail {
        return invalid("check_s2_linear needs v of degree <= 1");
    }
    require_dependent(&p)?;
    not_isometry(t, tol)?;
    let mut r = base_report(t, tol)?;
    let a = p.v.coeff(0).unwrap_or_default();
    let b = p.v.coeff(1).unwrap_or_default();
    let c1 = ip(&p.w, &p.v) + ONE;
    r.condition("1_pairing", c1.norm(), tol.residual);
    let u0 = p.u.coeff(0).unwrap_or_default();
    let u1 = p.u.coeff(1).unwrap_or_default();
    let c2 = u1 * a - b * u0;
    r.condition("2_linear", c2.norm(), tol.residual);
    let nv = p.v.norm();
    let zero = C64::new(0.0, 0.0);
    r.cert("g1", cvec_json(&[b.conj() / nv, -a.conj() / nv]));
    r.cert("g2", cvec_json(&[zero, zero, a / nv, b / nv]));
    let ok = r.all_conditions_hold();
    Ok(r.finish(ok, Classification::Dependent))
}
