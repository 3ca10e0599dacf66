use num_complex::Complex64 as C64;
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat, ONE};
use crate::operators::TruncOperator;
use crate::report::{cjson, cmat_json, CheckReport, Classification};
use crate::tol::Tolerances;

use super::theta::{check_type1, check_type2, theta_zeros};
use super::{base_report, ip, kernel_wandering, Parts, DEPENDENCE_ANGLE, DOUBLE_ZERO_TOL};

#[derive(Debug, Clone)]
pub struct IndependentInvariants {
    pub r0: C64,
    pub r1: C64,
    pub s0_dep: C64,
    pub s1_dep: C64,
    pub s0_display: C64,
    pub s1_display: C64,
    /// assembled from `r0, r1, s0, s1` and the Gram quantities
    pub a_matrix: CMat,
    pub a_display: CMat,
    /// `|v|^2 |S_k*u|^2 - |<v, S_k*u>|^2`
    pub det: f64,
    /// `G[i][j] = <x_j, x_i>` for `x = (v, S_k*u)`
    pub gram: CMat,
    /// `|A*A - AA*|` of `A` itself
    pub literal_normality: f64,
    /// normality of `G^{1/2} (A / det) G^{-1/2}`, scaled by `max(1, |T|)^2`
    pub normality_residual: f64,
    pub display_normality: f64,
    /// `|A / det - G^{-1} [<T x_j, x_i>]|`
    pub compression_gap: f64,
}

fn assemble(r0: C64, r1: C64, s0: C64, s1: C64, nv: f64, nw: f64, wv: C64) -> CMat {
    let vw = wv.conj();
    CMat::from_row_slice(
        2,
        2,
        &[r0 * nw - r1 * wv, s0 * nw - s1 * wv, -r0 * vw + r1 * nv, -s0 * vw + s1 * nv],
    )
}

fn gram_normality(m: &CMat, g: &CMat) -> f64 {
    let b = linalg::pd_power(g, 0.5) * m * linalg::pd_power(g, -0.5);
    linalg::normality_residual(&b)
}

pub fn independent_invariants(t: &TruncOperator, tol: &Tolerances) -> Result<IndependentInvariants> {
    let p = Parts::of(t)?;
    let nv = p.v.norm_sq().0;
    let nw = p.w.norm_sq().0;
    let wv = ip(&p.w, &p.v);
    let det = nv * nw - wv.norm_sqr();
    if det <= tol.rank * nv * nw || p.angle() < DEPENDENCE_ANGLE {
        return invalid("v and S_k*u are dependent; use the dependent branch");
    }
    let zkv = p.v.shift_up(p.k)?;
    let pu = p.pu();
    let (uv, uw) = (ip(&p.u, &p.v), ip(&p.u, &p.w));
    let r0 = ip(&zkv, &p.v) + uv * nv;
    let r1 = ip(&zkv, &p.w) + uw * nv;
    let s0_dep = (ONE + wv) * uv - ip(&pu, &p.v);
    let s1_dep = (ONE + wv) * uw - ip(&pu, &p.w);
    let s0_display = (ONE + wv) * uv + ip(&pu, &p.v);
    let s1_display = (ONE + wv) * uw + ip(&pu, &p.w);
    let a_matrix = assemble(r0, r1, s0_dep, s1_dep, nv, nw, wv);
    let a_display = assemble(r0, r1, s0_display, s1_display, nv, nw, wv);
    let gram = CMat::from_row_slice(2, 2, &[C64::new(nv, 0.0), wv, wv.conj(), C64::new(nw, 0.0)]);

    // independent path: the compression from images of T
    let tv = zkv.add(&p.u.scale(C64::new(nv, 0.0)))?;
    let tw = p.w.shift_up(p.k)?.add(&p.u.scale(wv))?;
    let c = CMat::from_row_slice(2, 2, &[ip(&tv, &p.v), ip(&tw, &p.v), ip(&tv, &p.w), ip(&tw, &p.w)]);
    let ginv = gram.clone().try_inverse().ok_or_else(|| Error::Numerical("singular Gram matrix".into()))?;
    let comp = ginv * c;
    let scaled = a_matrix.unscale(det);
    let compression_gap = linalg::max_abs(&(&scaled - &comp));
    let nb = t.norm_bound().max(1.0).powi(2);
    Ok(IndependentInvariants {
        r0,
        r1,
        s0_dep,
        s1_dep,
        s0_display,
        s1_display,
        literal_normality: linalg::normality_residual(&a_matrix),
        normality_residual: gram_normality(&scaled, &gram) / nb,
        display_normality: gram_normality(&a_display.unscale(det), &gram) / nb,
        a_matrix,
        a_display,
        det,
        gram,
        compression_gap,
    })
}

/// `span{v, S_k*u}` is `S_k*`-invariant, `A` is normal (in the geometry of its
/// basis) and rel1 / rel2 hold for every wandering generator.
pub fn check_independent(t: &TruncOperator, tol: &Tolerances) -> Result<CheckReport> {
    let p = Parts::of(t)?;
    let inv = independent_invariants(t, tol)?;
    let mut r = base_report(t, tol)?;
    let q = p.defect_basis(false);
    let mut sq = CMat::zeros(p.n, 2);
    for j in 0..2 {
        sq.set_column(j, &super::backward(&q.column(j).into_owned(), p.k));
    }
    let invariance = linalg::max_abs(&(&sq - &q * (q.adjoint() * &sq)));
    r.condition("span_invariant", invariance, tol.residual);
    r.condition("A_normal", inv.normality_residual, tol.residual);
    r.diagnostic("A_literal_normality", inv.literal_normality);
    r.diagnostic("a_matrix_display_normality", inv.display_normality);
    r.diagnostic("a_matrix_vs_compression", inv.compression_gap);

    let nv = p.v.norm_sq().0;
    let wv = ip(&p.w, &p.v);
    let pu = p.pu();
    match kernel_wandering(t, tol) {
        Ok(wb) => {
            let zkv = p.v.shift_up(p.k)?;
            let (mut r1, mut r2, mut r2d): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for g in &wb.generators {
                let ug = ip(&p.u, g);
                r1 = r1.max((ip(&zkv, g) + ug * nv).norm());
                r2 = r2.max(((ONE + wv) * ug - ip(&pu, g)).norm());
                r2d = r2d.max(((ONE + wv) * ug + ip(&pu, g)).norm());
            }
            r.condition("rel1", r1, tol.residual);
            r.condition("rel2", r2, tol.residual);
            r.diagnostic("rel2_display", r2d);
            r.cert("m", json!(wb.m));
        }
        Err(Error::NotInvariant { residual }) => {
            r.flag("rel1", residual, false);
            r.flag("rel2", residual, false);
        }
        Err(e) => return Err(e),
    }
    r.cert("r0", cjson(inv.r0));
    r.cert("r1", cjson(inv.r1));
    r.cert("s0", cjson(inv.s0_dep));
    r.cert("s1", cjson(inv.s1_dep));
    r.cert("A", cmat_json(&inv.a_matrix));
    let verdict = r.all_conditions_hold();
    let mut class = Classification::IndependentOther;
    if verdict && p.k == 1 {
        if let Ok((zeros, _)) = theta_zeros(&p) {
            r.cert("theta_zeros", json!(zeros.iter().map(|z| cjson(*z)).collect::<Vec<_>>()));
            let sub = if (zeros[0] - zeros[1]).norm() <= DOUBLE_ZERO_TOL {
                class = Classification::IndependentTypeI;
                check_type1(t, tol, Some((zeros[0] + zeros[1]) * 0.5))
            } else {
                class = Classification::IndependentTypeII;
                check_type2(t, tol, Some((zeros[0], zeros[1])))
            };
            match sub {
                Ok(s) => {
                    r.diagnostic("type_checker_verdict", f64::from(u8::from(s.verdict)));
                    if !s.verdict {
                        r.consistency_alarm = Some("Type I/II conditions disagree with the independent-branch check".into());
                    }
                }
                Err(e) => r.cert("type_checker_error", json!(e.to_string())),
            }
        }
    }
    let alarm = r.consistency_alarm.take();
    let mut out = r.finish(verdict, class);
    if out.consistency_alarm.is_none() {
        out.consistency_alarm = alarm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::HCoeffVec;
    use crate::linalg::c;

    #[test]
    fn hand_example_matrix() {
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let t = TruncOperator::perturbed_shift(1, &u, &v, 64, &Tolerances::default()).unwrap();
        let inv = independent_invariants(&t, &Tolerances::default()).unwrap();
        assert!(inv.r0.norm() < 1e-15 && (inv.r1 - ONE).norm() < 1e-15);
        assert!(inv.s0_dep.norm() < 1e-15 && inv.s1_dep.norm() < 1e-15);
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), ONE, c(0.0, 0.0)]);
        assert!(linalg::max_abs(&(&inv.a_matrix - want)) < 1e-15);
        assert!(inv.literal_normality > 0.5);
        assert!(inv.compression_gap < 1e-14);
        let r = check_independent(&t, &Tolerances::default()).unwrap();
        assert!(!r.verdict && r.conditions_hold["span_invariant"] && r.consistency_alarm.is_none());
    }

    #[test]
    fn zero_matrix_case() {
        // v = 1, u = z^2 shifted so that all four scalars vanish: u = z^3 with k = 2 gives S*^2 u = z
        let u = HCoeffVec::polynomial(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let v = HCoeffVec::polynomial(vec![c(1.0, 0.0)]);
        let t = TruncOperator::perturbed_shift(2, &u, &v, 64, &Tolerances::default()).unwrap();
        let inv = independent_invariants(&t, &Tolerances::default()).unwrap();
        assert!(linalg::max_abs(&inv.a_matrix) < 1e-15);
        assert!(inv.normality_residual < 1e-15);
    }
}
