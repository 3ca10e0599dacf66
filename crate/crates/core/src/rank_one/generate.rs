use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::funcspec::{complex_to_json, FunctionSpec};
use crate::linalg::{self, CMat, ONE};
use crate::operators::{self, TruncOperator};
use crate::opspec::{OperatorSpec, Truncation};
use crate::tol::Tolerances;

use super::{principal_angle, DOUBLE_ZERO_TOL};

/// A generated instance `T = S_k + u (x) v` together with its exact description.
#[derive(Debug, Clone)]
pub struct Generated {
    pub k: usize,
    pub u: FunctionSpec,
    pub v: FunctionSpec,
    pub op: TruncOperator,
    pub params: Value,
}

impl Generated {
    pub fn spec(&self) -> OperatorSpec {
        OperatorSpec::PerturbedShift {
            k: self.k,
            u: self.u.clone(),
            v: self.v.clone(),
            n: Truncation::Fixed(self.op.n()),
        }
    }
}

fn build(k: usize, u: FunctionSpec, v: FunctionSpec, n: usize, tol: &Tolerances, params: Value) -> Result<Generated> {
    let op = TruncOperator::perturbed_shift(k, &u.materialize(n)?, &v.materialize(n)?, n, tol)?;
    Ok(Generated { k, u, v, op, params })
}

fn assert_quasinormal(g: Generated, tol: &Tolerances) -> Result<Generated> {
    let res = operators::scaled_quasinormal_residual(&g.op)?;
    if res > tol.residual {
        return Err(Error::Numerical(format!("generated instance misses the oracle: residual {res:.3e}")));
    }
    Ok(g)
}

/// `k = 1`, `u = u0 + c z k_alpha` and `v = t k_alpha` with `conj(v(alpha)) = -1 / R`,
/// `R = c - conj(alpha) u0`.
pub fn generate_dependent(alpha: C64, u0: C64, c_scale: C64, n: usize, tol: &Tolerances) -> Result<Generated> {
    if !(alpha.norm() < 1.0) {
        return invalid("alpha must lie in the open disk");
    }
    if c_scale.norm() == 0.0 {
        return Err(Error::Precondition("degenerate: S*u = 0 leaves no dependent pair".into()));
    }
    let rr = c_scale - alpha.conj() * u0;
    if rr.norm() <= tol.rank {
        return Err(Error::Precondition("degenerate: no dependent quasinormal v exists for this u".into()));
    }
    let t = -(1.0 - alpha.norm_sqr()) / rr.conj();
    let ka = FunctionSpec::Szego(alpha);
    let u = FunctionSpec::Sum(vec![FunctionSpec::Poly(vec![u0]), ka.clone().scaled(c_scale).zshift(1)]);
    let v = ka.scaled(t);
    let params = json!({
        "family": "dependent",
        "alpha": complex_to_json(alpha),
        "u0": complex_to_json(u0),
        "c_scale": complex_to_json(c_scale),
    });
    assert_quasinormal(build(1, u, v, n, tol, params)?, tol)
}

/// Any `k`: `v = p(z) k_a(z^k)` with `deg p < k` is an `S_k*`-eigenvector and
/// `u = (mu v - z^k v) / |v|^2` makes it a `T`-eigenvector with eigenvalue `mu`.
pub fn generate_dependent_eigen(
    k: usize,
    a: C64,
    p: &[C64],
    mu: C64,
    n: usize,
    tol: &Tolerances,
) -> Result<Generated> {
    if k == 0 || p.is_empty() || p.len() > k {
        return invalid("need k >= 1 and 1 <= len(p) <= k");
    }
    if !(a.norm() < 1.0) {
        return invalid("a must lie in the open disk");
    }
    if (mu.norm() - 1.0).abs() <= 1e-6 {
        return Err(Error::Precondition("|mu| = 1 gives an isometry".into()));
    }
    let pn: f64 = p.iter().map(|z| z.norm_sqr()).sum();
    if pn == 0.0 {
        return invalid("p must be nonzero");
    }
    let nv = pn / (1.0 - a.norm_sqr());
    let v = FunctionSpec::Product(vec![
        FunctionSpec::Poly(p.to_vec()),
        FunctionSpec::SubstZk(k, Box::new(FunctionSpec::Szego(a))),
    ]);
    let u = FunctionSpec::Sum(vec![v.clone().scaled(mu / nv), v.clone().zshift(k).scaled(C64::new(-1.0 / nv, 0.0))]);
    let params = json!({
        "family": "dependent_eigen",
        "k": k,
        "a": complex_to_json(a),
        "p": p.iter().map(|z| complex_to_json(*z)).collect::<Vec<_>>(),
        "mu": complex_to_json(mu),
    });
    assert_quasinormal(build(k, u, v, n, tol, params)?, tol)
}

/// `v = (e^{it} - 1) S_k* u` with `|u| = 1` makes `S_k + u (x) v` an isometry.
pub fn generate_isometry(k: usize, phase: f64, u: &FunctionSpec, n: usize, tol: &Tolerances) -> Result<Generated> {
    let lam = C64::from_polar(1.0, phase);
    if (lam - ONE).norm() <= 1e-12 {
        return Err(Error::Precondition("e^{it} = 1 gives the unperturbed shift".into()));
    }
    let uu = u.materialize(n)?;
    if (uu.norm() - 1.0).abs() > 1e-10 {
        return invalid(format!("u must have unit norm, |u| = {}", uu.norm()));
    }
    let su = uu.backward_shift(k);
    if su.norm() <= tol.rank {
        return Err(Error::Precondition("S_k* u = 0".into()));
    }
    if su.mass_beyond(n) > tol.tail {
        return Err(Error::InsufficientTruncation { needed: su.required_truncation(tol.tail), have: n });
    }
    let v = FunctionSpec::Poly(su.dense(n).into_iter().map(|z| z * (lam - ONE)).collect());
    let params = json!({"family": "isometry", "k": k, "phase": phase});
    let g = build(k, u.clone(), v, n, tol, params)?;
    let d = operators::isometry_defect(&g.op);
    if d > tol.residual {
        return Err(Error::Numerical(format!("generated isometry has defect {d:.3e}")));
    }
    Ok(g)
}

/// Independent family. With `x0 = p(z) (k_alpha k_beta)(z^k)` the defect range is
/// `D = span{x0, z^k x0}`; `T` maps `e2` to `c e1 + d e2` where `[[a, c], [b, d]]`
/// is the normal completion of the first column of the compressed shift.
pub fn generate_independent(
    k: usize,
    alpha: C64,
    beta: C64,
    p: &[C64],
    d: C64,
    n: usize,
    tol: &Tolerances,
) -> Result<Generated> {
    if k == 0 || p.is_empty() || p.len() > k {
        return invalid("need k >= 1 and 1 <= len(p) <= k");
    }
    if !(alpha.norm() < 1.0 && beta.norm() < 1.0) {
        return invalid("alpha and beta must lie in the open disk");
    }
    let x0 = FunctionSpec::Product(vec![
        FunctionSpec::Poly(p.to_vec()),
        FunctionSpec::SubstZk(k, Box::new(FunctionSpec::Product(vec![FunctionSpec::Szego(alpha), FunctionSpec::Szego(beta)]))),
    ]);
    let xs: Vec<FunctionSpec> = (0..3).map(|i| x0.clone().zshift(i * k)).collect();
    let hv = xs.iter().map(|f| f.materialize(n)).collect::<Result<Vec<_>>>()?;
    let g = |i: usize, j: usize| hv[i].inner(&hv[j]).0;
    let m00 = g(0, 0).re;
    let m10 = g(1, 0);
    let n0 = m00.sqrt();
    let h = m10 / m00;
    let n2sq = m00 - m10.norm_sqr() / m00;
    if n2sq <= tol.rank * m00 {
        return Err(Error::Precondition("x0 and z^k x0 are dependent".into()));
    }
    let n2 = n2sq.sqrt();
    // e1 = X0 / n0, e2 = (X1 - h X0) / n2, z^k e1 = X1 / n0, z^k e2 = (X2 - h X1) / n2
    let a = h;
    let b = (g(1, 1) - h.conj() * m10) / (n0 * n2);
    if (a - d).norm() <= 1e-12 {
        return Err(Error::Precondition("d must differ from the compressed shift diagonal entry".into()));
    }
    let c = b.conj() * (a - d) / (a - d).conj();
    let nmat = CMat::from_row_slice(2, 2, &[a, c, b, d]);
    let (sv, _) = linalg::svd_full(&nmat);
    if sv.iter().any(|s| (s - 1.0).abs() < 0.05) {
        return Err(Error::Precondition("normal completion has a singular value near 1".into()));
    }
    // y = c e1 + d e2 - z^k e2 in terms of X0, X1, X2
    let y = [c / n0 - d * h / n2, d / n2 + h / n2, C64::new(-1.0 / n2, 0.0)];
    let e2 = [-h / n2, C64::new(1.0 / n2, 0.0)];
    let comb = |coef: &[C64]| {
        FunctionSpec::Sum(coef.iter().zip(&xs).filter(|(s, _)| s.norm() > 0.0).map(|(s, f)| f.clone().scaled(*s)).collect())
    };
    let u = comb(&y);
    let v = comb(&e2);
    let params = json!({
        "family": "independent",
        "k": k,
        "alpha": complex_to_json(alpha),
        "beta": complex_to_json(beta),
        "p": p.iter().map(|z| complex_to_json(*z)).collect::<Vec<_>>(),
        "d": complex_to_json(d),
        "normal_completion": [[complex_to_json(a), complex_to_json(c)], [complex_to_json(b), complex_to_json(d)]],
    });
    let gen = build(k, u, v, n, tol, params)?;
    let uu = gen.u.materialize(n)?;
    let vv = gen.v.materialize(n)?;
    if principal_angle(&vv, &uu.backward_shift(k)) < 1e-6 {
        return Err(Error::Precondition("v and S_k* u came out dependent".into()));
    }
    assert_quasinormal(gen, tol)
}

fn random_d(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(rng.gen_range(0.0..1.8), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn multistart(
    seed: u64,
    attempts: usize,
    mut f: impl FnMut(C64) -> Result<Generated>,
) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..attempts {
        match f(random_d(&mut rng)) {
            Ok(g) => return Ok(g),
            Err(e @ (Error::Precondition(_) | Error::Numerical(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoSolution(format!(
        "no solution found from seed {seed}: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// `k = 1`, `ker(I - T*T) = B_alpha^2 H^2`.
pub fn generate_type1(alpha: C64, seed: u64, n: usize, tol: &Tolerances) -> Result<Generated> {
    multistart(seed, 64, |d| {
        let mut g = generate_independent(1, alpha, alpha, &[ONE], d, n, tol)?;
        g.params["family"] = json!("type1");
        g.params["seed"] = json!(seed);
        Ok(g)
    })
}

/// `k = 1`, `ker(I - T*T) = B_alpha B_beta H^2`, `alpha != beta`.
pub fn generate_type2(alpha: C64, beta: C64, seed: u64, n: usize, tol: &Tolerances) -> Result<Generated> {
    if (alpha - beta).norm() <= 100.0 * DOUBLE_ZERO_TOL {
        return Err(Error::Precondition("Type II needs two distinct zeros".into()));
    }
    multistart(seed, 64, |d| {
        let mut g = generate_independent(1, alpha, beta, &[ONE], d, n, tol)?;
        g.params["family"] = json!("type2");
        g.params["seed"] = json!(seed);
        Ok(g)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::rank_one::{beurling_theta, check, check_dependent_shift, check_type1, check_type2};
    use crate::report::Classification;

    fn zero() -> C64 {
        c(0.0, 0.0)
    }

    #[test]
    fn dependent_recovers_s_minus_z1() {
        let tol = Tolerances::default();
        let g = generate_dependent(zero(), zero(), c(-1.0, 0.0), 64, &tol).unwrap();
        let u = g.u.materialize(8).unwrap();
        let v = g.v.materialize(8).unwrap();
        assert!((u.coeff(1).unwrap() + ONE).norm() < 1e-15 && u.coeff(0).unwrap().norm() < 1e-15);
        assert!((v.coeff(0).unwrap() - ONE).norm() < 1e-15 && v.coeff(1).unwrap().norm() < 1e-15);
    }

    #[test]
    fn dependent_at_04() {
        let tol = Tolerances::default();
        let g = generate_dependent(c(0.4, 0.0), c(0.2, 0.0), ONE, 128, &tol).unwrap();
        assert!(check(&g.op, &tol).unwrap().verdict);
        assert!(check_dependent_shift(&g.op, &tol).unwrap().verdict);
        let th = beurling_theta(&g.op, &tol).unwrap();
        assert_eq!(th.degree(), 1);
        assert!((th.zeros()[0] - c(0.4, 0.0)).norm() < 1e-8);
        assert!(generate_dependent(zero(), c(0.3, 0.0), zero(), 64, &tol).is_err());
    }

    #[test]
    fn dependent_eigen_k3() {
        let tol = Tolerances::default();
        let g = generate_dependent_eigen(3, c(0.3, 0.2), &[ONE, c(0.0, 0.5)], c(0.4, 0.0), 256, &tol).unwrap();
        let r = check(&g.op, &tol).unwrap();
        assert!(r.verdict && r.classification == Classification::Dependent && r.consistency_alarm.is_none());
    }

    #[test]
    fn isometry_examples() {
        let tol = Tolerances::default();
        let s3 = 3f64.sqrt();
        let u = FunctionSpec::Poly(vec![c(1.0 / s3, 0.0); 3]);
        generate_isometry(1, 1.3, &u, 64, &tol).unwrap();
        let g = generate_isometry(1, std::f64::consts::PI, &FunctionSpec::monomial(1), 64, &tol).unwrap();
        let v = g.v.materialize(4).unwrap();
        assert!((v.coeff(0).unwrap() - c(-2.0, 0.0)).norm() < 1e-15);
        assert!(generate_isometry(1, 1.0, &FunctionSpec::Poly(vec![ONE]), 64, &tol).is_err());
    }

    #[test]
    fn type1_and_type2() {
        let tol = Tolerances::default();
        for alpha in [zero(), c(0.3, -0.2)] {
            let g = generate_type1(alpha, 7, 160, &tol).unwrap();
            let r = check(&g.op, &tol).unwrap();
            assert!(r.verdict && r.classification == Classification::IndependentTypeI, "{alpha}");
            assert!(r.consistency_alarm.is_none());
            assert!(check_type1(&g.op, &tol, None).unwrap().verdict);
        }
        let g = generate_type2(zero(), c(0.5, 0.0), 3, 160, &tol).unwrap();
        let r = check(&g.op, &tol).unwrap();
        assert!(r.verdict && r.classification == Classification::IndependentTypeII);
        let swapped = check_type2(&g.op, &tol, Some((c(0.5, 0.0), zero()))).unwrap();
        assert!(swapped.verdict);
        assert!(generate_type2(c(0.2, 0.0), c(0.2, 0.0), 1, 64, &tol).is_err());
    }

    #[test]
    fn independent_general_k() {
        let tol = Tolerances::default();
        let g = generate_independent(2, c(0.2, 0.1), c(-0.4, 0.0), &[ONE, c(0.5, 0.0)], c(1.5, 0.3), 160, &tol).unwrap();
        let r = check(&g.op, &tol).unwrap();
        assert!(r.verdict && r.classification == Classification::IndependentOther && r.consistency_alarm.is_none());
    }
}
