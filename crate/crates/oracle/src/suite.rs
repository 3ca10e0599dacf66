//! Randomized checker/oracle agreement runs. Even trials are built to pass,
//! odd trials break one condition of a passing instance and escalate the
//! perturbation until the oracle residual clears `100 * residual_tol`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use quasinormal::cnu::{check_cnu_quasinormal, split_cnu};
use quasinormal::funcspec::{complex_from_json, FunctionSpec};
use quasinormal::linalg::CMat;
use quasinormal::operators::{self, TruncOperator};
use quasinormal::opspec::{OperatorSpec, Truncation};
use quasinormal::rank_one::{
    self, beurling_theta, branch_of, generate_dependent, generate_independent, generate_type1, generate_type2,
    kernel_wandering, Branch, Generated,
};
use quasinormal::report::{CheckReport, Classification};
use quasinormal::spectral::{check_polar_commutation, extract_decomposition, synthesize, IsometryKind};
use quasinormal::{Error, Result, Tolerances};

use crate::brute::brute_residual;

/// Truncation used by the rank-one families.
pub const SUITE_N: usize = 256;
/// Truncation used by the synthesized family.
pub const SYNTH_N: usize = 128;
/// Required oracle margin for perturbed-to-fail instances, in units of `residual_tol`.
pub const FAIL_MARGIN: f64 = 100.0;
/// Bound on `|brute - quasinormal_residual|` (both scaled).
pub const DUAL_PATH_TOL: f64 = 1e-12;
/// Tolerance on recovered Beurling zeros and planted phases.
pub const ZERO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Dependent,
    Independent,
    Type1,
    Type2,
    CnuDim1,
    Synthesize,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Dependent, Family::Independent, Family::Type1, Family::Type2, Family::CnuDim1, Family::Synthesize];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Dependent => "dependent",
            Family::Independent => "independent",
            Family::Type1 => "type1",
            Family::Type2 => "type2",
            Family::CnuDim1 => "cnu-dim1",
            Family::Synthesize => "synthesize",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .find(|f| f.as_str() == s)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub family: Family,
    /// `pass` or the name of the broken condition
    pub kind: String,
    pub instance_spec: Value,
    pub checker_verdict: bool,
    pub oracle_verdict: bool,
    pub classification: Option<Classification>,
    pub residuals: BTreeMap<String, f64>,
    /// invariant violations, checker errors and alarms
    pub problems: Vec<String>,
}

impl TrialRecord {
    fn new(trial: usize, seed: u64, family: Family, kind: &str) -> Self {
        TrialRecord {
            trial,
            seed,
            family,
            kind: kind.to_string(),
            instance_spec: Value::Null,
            checker_verdict: false,
            oracle_verdict: false,
            classification: None,
            residuals: BTreeMap::new(),
            problems: Vec::new(),
        }
    }

    pub fn agrees(&self) -> bool {
        self.checker_verdict == self.oracle_verdict
    }

    pub fn ok(&self) -> bool {
        self.agrees() && self.problems.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "trial": self.trial,
            "seed": self.seed,
            "family": self.family.as_str(),
            "kind": self.kind,
            "instance_spec": self.instance_spec,
            "checker_verdict": self.checker_verdict,
            "oracle_verdict": self.oracle_verdict,
            "classification": self.classification.map(|c| c.as_str()),
            "residuals": self.residuals,
            "problems": self.problems,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub family: Family,
    pub trials: usize,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
}

impl SuiteSummary {
    pub fn agreements(&self) -> usize {
        self.records.iter().filter(|r| r.agrees()).count()
    }

    pub fn failures(&self) -> Vec<&TrialRecord> {
        self.records.iter().filter(|r| !r.ok()).collect()
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(TrialRecord::ok)
    }

    pub fn max_residual(&self, key: &str) -> f64 {
        self.records.iter().filter_map(|r| r.residuals.get(key)).fold(0.0, |a, &b| a.max(b))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "family": self.family.as_str(),
            "trials": self.trials,
            "seed": self.seed,
            "agreements": self.agreements(),
            "agreement_rate": self.agreements() as f64 / self.trials as f64,
            "passed": self.passed(),
            "pass_instances": self.records.iter().filter(|r| r.kind == "pass").count(),
            "max_dual_path_gap": self.max_residual("dual_path_gap"),
            "failures": self.failures().iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        })
    }
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn disk(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::from_polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU))
}

fn polar_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> C64 {
    C64::from_polar(rng.gen_range(lo..hi), rng.gen_range(0.0..TAU))
}

pub fn equivalence_suite(family: Family, trials: usize, seed: u64, tol: &Tolerances) -> Result<SuiteSummary> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    tol.validate()?;
    let records = (0..trials).map(|i| run_trial(family, i, trial_seed(seed, i), tol)).collect();
    Ok(SuiteSummary { family, trials, seed, records })
}

pub fn run_trial(family: Family, trial: usize, seed: u64, tol: &Tolerances) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pass = trial.is_multiple_of(2);
    let variant = trial / 2;
    let out = match family {
        Family::Dependent => dependent_trial(&mut rng, pass, variant, tol),
        Family::Independent => independent_trial(&mut rng, pass, variant, tol),
        Family::Type1 | Family::Type2 => type_trial(family, &mut rng, pass, variant, tol),
        Family::CnuDim1 => cnu_trial(&mut rng, pass, tol),
        Family::Synthesize => synth_trial(&mut rng, pass, tol),
    };
    match out {
        Ok(mut r) => {
            r.trial = trial;
            r.seed = seed;
            r.family = family;
            r
        }
        Err(e) => {
            let mut r = TrialRecord::new(trial, seed, family, if pass { "pass" } else { "control" });
            r.problems.push(format!("trial setup failed: {e}"));
            r
        }
    }
}

/// Oracle residual by the brute path, scaled like the main crate's, plus the dual-path gap.
fn oracle(t: &TruncOperator, r: &mut TrialRecord) -> Result<f64> {
    let scale = t.norm_bound().max(1.0).powi(3);
    let brute = brute_residual(t)? / scale;
    let fast = operators::scaled_quasinormal_residual(t)?;
    let gap = (brute - fast).abs();
    r.residuals.insert("oracle".into(), brute);
    r.residuals.insert("dual_path_gap".into(), gap);
    if gap > DUAL_PATH_TOL {
        r.problems.push(format!("dual-path discrepancy {gap:.3e}"));
    }
    Ok(brute)
}

fn absorb(r: &mut TrialRecord, rep: &CheckReport) {
    r.checker_verdict = rep.verdict;
    r.classification = Some(rep.classification);
    for (k, v) in &rep.condition_residuals {
        r.residuals.insert(k.clone(), *v);
    }
    if let Some(a) = &rep.consistency_alarm {
        r.problems.push(format!("consistency alarm: {a}"));
    }
}

/// Builds the perturbed instance for growing `delta` until the oracle clears the margin.
fn calibrated(
    tol: &Tolerances,
    delta0: f64,
    mut make: impl FnMut(f64) -> Result<(TruncOperator, Value)>,
) -> Result<(TruncOperator, Value, f64)> {
    let mut delta = delta0;
    for _ in 0..12 {
        let (t, spec) = make(delta)?;
        let res = operators::scaled_quasinormal_residual(&t)?;
        if res >= FAIL_MARGIN * tol.residual {
            return Ok((t, spec, delta));
        }
        delta *= 4.0;
    }
    Err(Error::NoSolution(format!("perturbation did not reach the oracle margin (delta up to {delta:.3e})")))
}

fn rank_one_op(k: usize, u: &FunctionSpec, v: &FunctionSpec, n: usize, tol: &Tolerances) -> Result<(TruncOperator, Value)> {
    let spec = OperatorSpec::PerturbedShift { k, u: u.clone(), v: v.clone(), n: Truncation::Fixed(n) };
    Ok((spec.build(tol)?, spec.to_json()))
}

/// Routed check plus the kernel invariants on quasinormal instances.
fn eval_rank_one(mut r: TrialRecord, t: &TruncOperator, spec: Value, tol: &Tolerances) -> Result<TrialRecord> {
    r.instance_spec = spec;
    let res = oracle(t, &mut r)?;
    r.oracle_verdict = res <= tol.residual;
    match rank_one::check(t, tol) {
        Ok(rep) => absorb(&mut r, &rep),
        Err(e) => r.problems.push(format!("checker error: {e}")),
    }
    if r.oracle_verdict {
        kernel_invariants(&mut r, t, tol);
    }
    Ok(r)
}

fn kernel_invariants(r: &mut TrialRecord, t: &TruncOperator, tol: &Tolerances) {
    let k = match t.origin() {
        operators::Origin::PerturbedShift { k, .. } => *k,
        _ => return,
    };
    let branch = match branch_of(t, tol) {
        Ok(b) => b,
        Err(e) => return r.problems.push(format!("branch: {e}")),
    };
    match kernel_wandering(t, tol) {
        Ok(w) => {
            r.residuals.insert("kernel_invariance".into(), w.invariance_residual);
            if w.m > k {
                r.problems.push(format!("m = {} > k = {k}", w.m));
            }
            if w.invariance_residual > 1e-8 {
                r.problems.push(format!("S_k ker not inside ker ({:.3e})", w.invariance_residual));
            }
        }
        Err(e) => r.problems.push(format!("kernel_wandering: {e}")),
    }
    let want = match branch {
        Branch::Isometry => 0,
        Branch::Dependent => 1,
        Branch::Independent => 2,
    };
    let got = operators::defect(t, tol).defect_rank;
    if got != want {
        r.problems.push(format!("defect range dimension {got} for the {branch:?} branch"));
    }
    if k == 1 {
        match beurling_theta(t, tol) {
            Ok(th) if th.degree() <= 2 => {
                r.residuals.insert("theta_orthogonality".into(), th.orthogonality_residual);
            }
            Ok(th) => r.problems.push(format!("theta of degree {}", th.degree())),
            Err(e) => r.problems.push(format!("beurling_theta: {e}")),
        }
    }
}

fn dependent_trial(rng: &mut ChaCha8Rng, pass: bool, variant: usize, tol: &Tolerances) -> Result<TrialRecord> {
    let mut last = None;
    for _ in 0..16 {
        let alpha = disk(rng, 0.8);
        let u0 = disk(rng, 1.0);
        let c = polar_in(rng, 0.3, 1.5);
        match generate_dependent(alpha, u0, c, SUITE_N, tol) {
            Ok(g) => return dependent_from(g, alpha, u0, c, pass, variant, tol),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::NoSolution("dependent generator".into())))
}

fn dependent_from(
    g: Generated,
    alpha: C64,
    u0: C64,
    c: C64,
    pass: bool,
    variant: usize,
    tol: &Tolerances,
) -> Result<TrialRecord> {
    if pass {
        let r = TrialRecord::new(0, 0, Family::Dependent, "pass");
        return eval_rank_one(r, &g.op, g.spec().to_json(), tol);
    }
    let one = C64::new(1.0, 0.0);
    if variant.is_multiple_of(2) {
        // keeps the eigenvector, breaks the generator relation
        let (t, spec, d) = calibrated(tol, 1e-3, |d| rank_one_op(1, &g.u, &g.v.clone().scaled(one + d), SUITE_N, tol))?;
        let mut r = TrialRecord::new(0, 0, Family::Dependent, "scale_v");
        r.residuals.insert("delta".into(), d);
        return eval_rank_one(r, &t, spec, tol);
    }
    // keeps dependence, breaks the eigenvector property
    let rr = c - alpha.conj() * u0;
    let tt = -(1.0 - alpha.norm_sqr()) / rr.conj();
    let (t, spec, d) = calibrated(tol, 1e-3, |d| {
        let v = FunctionSpec::Sum(vec![g.v.clone(), FunctionSpec::monomial(1).scaled(C64::new(d, 0.0))]);
        let u = FunctionSpec::Sum(vec![FunctionSpec::Poly(vec![u0]), v.clone().scaled(c / tt).zshift(1)]);
        rank_one_op(1, &u, &v, SUITE_N, tol)
    })?;
    let mut r = TrialRecord::new(0, 0, Family::Dependent, "off_eigenvector");
    r.residuals.insert("delta".into(), d);
    eval_rank_one(r, &t, spec, tol)
}

fn param_c(g: &Generated, key: &str) -> Result<C64> {
    complex_from_json(&g.params[key])
}

fn param_poly(g: &Generated) -> Result<Vec<C64>> {
    g.params["p"].as_array().map_or_else(
        || Err(Error::InvalidInput("generated params carry no `p`".into())),
        |a| a.iter().map(complex_from_json).collect(),
    )
}

const INDEPENDENT_CONTROLS: [&str; 4] = ["non_normal", "u_constant", "v_off_span", "u_plus_z3"];

/// Perturbs a generated independent instance in one predicate.
fn independent_control(g: &Generated, kind: &str, tol: &Tolerances) -> Result<(TruncOperator, Value, f64)> {
    let k = g.k;
    let n = g.op.n();
    let (alpha, beta, p) = (param_c(g, "alpha")?, param_c(g, "beta")?, param_poly(g)?);
    let x0 = FunctionSpec::Product(vec![
        FunctionSpec::Poly(p.clone()),
        FunctionSpec::SubstZk(k, Box::new(FunctionSpec::Product(vec![FunctionSpec::Szego(alpha), FunctionSpec::Szego(beta)]))),
    ]);
    let x0n = x0.materialize(n)?.norm();
    let pn = p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let h = FunctionSpec::Product(vec![
        FunctionSpec::Poly(p.clone()),
        FunctionSpec::SubstZk(
            k,
            Box::new(FunctionSpec::Product(vec![
                FunctionSpec::Blaschke { alpha, power: 1 },
                FunctionSpec::Blaschke { alpha: beta, power: 1 },
            ])),
        ),
    ]);
    let re = |d: f64| C64::new(d, 0.0);
    calibrated(tol, 1e-3, |d| match kind {
        // the normal completion loses normality: T e2 picks up d e1
        "non_normal" => rank_one_op(k, &FunctionSpec::Sum(vec![g.u.clone(), x0.clone().scaled(re(d / x0n))]), &g.v, n, tol),
        "u_constant" => rank_one_op(k, &FunctionSpec::Sum(vec![g.u.clone(), FunctionSpec::Poly(vec![re(d)])]), &g.v, n, tol),
        "v_off_span" => rank_one_op(k, &g.u, &FunctionSpec::Sum(vec![g.v.clone(), h.clone().scaled(re(d / pn))]), n, tol),
        "u_plus_z3" => rank_one_op(k, &FunctionSpec::Sum(vec![g.u.clone(), FunctionSpec::monomial(3).scaled(re(d))]), &g.v, n, tol),
        other => Err(Error::InvalidInput(format!("unknown control `{other}`"))),
    })
}

fn independent_trial(rng: &mut ChaCha8Rng, pass: bool, variant: usize, tol: &Tolerances) -> Result<TrialRecord> {
    if !pass && variant % 5 == 4 {
        // unstructured polynomial pair
        let k = rng.gen_range(1..=2);
        let mut poly = |len: usize| FunctionSpec::Poly((0..len).map(|_| disk(rng, 1.0)).collect());
        let (u, v) = (poly(4), poly(3));
        let (t, spec) = rank_one_op(k, &u, &v, 64, tol)?;
        return eval_rank_one(TrialRecord::new(0, 0, Family::Independent, "random_poly"), &t, spec, tol);
    }
    let mut last = None;
    for _ in 0..64 {
        let k = rng.gen_range(1..=2);
        let alpha = disk(rng, 0.6);
        let beta = disk(rng, 0.6);
        let mut p: Vec<C64> = (0..k).map(|_| disk(rng, 1.0)).collect();
        p[0] = C64::new(1.0, 0.0);
        let d = polar_in(rng, 0.0, 1.8);
        match generate_independent(k, alpha, beta, &p, d, SUITE_N, tol) {
            Ok(g) => {
                if pass {
                    return eval_rank_one(TrialRecord::new(0, 0, Family::Independent, "pass"), &g.op, g.spec().to_json(), tol);
                }
                let kind = INDEPENDENT_CONTROLS[variant % 5 % 4];
                let (t, spec, delta) = independent_control(&g, kind, tol)?;
                let mut r = TrialRecord::new(0, 0, Family::Independent, kind);
                r.residuals.insert("delta".into(), delta);
                return eval_rank_one(r, &t, spec, tol);
            }
            Err(e @ (Error::Precondition(_) | Error::Numerical(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::NoSolution("independent generator".into())))
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn type_trial(family: Family, rng: &mut ChaCha8Rng, pass: bool, variant: usize, tol: &Tolerances) -> Result<TrialRecord> {
    let alpha = disk(rng, 0.6);
    let beta = loop {
        let b = disk(rng, 0.6);
        if (b - alpha).norm() >= 0.1 {
            break b;
        }
    };
    let gseed = rng.gen::<u64>();
    let g = if family == Family::Type1 {
        generate_type1(alpha, gseed, SUITE_N, tol)?
    } else {
        generate_type2(alpha, beta, gseed, SUITE_N, tol)?
    };
    if !pass {
        let kind = INDEPENDENT_CONTROLS[variant % 4];
        let (t, spec, delta) = independent_control(&g, kind, tol)?;
        let mut r = TrialRecord::new(0, 0, family, kind);
        r.residuals.insert("delta".into(), delta);
        return eval_rank_one(r, &t, spec, tol);
    }
    let mut r = eval_rank_one(TrialRecord::new(0, 0, family, "pass"), &g.op, g.spec().to_json(), tol)?;
    let (want_class, want): (Classification, Vec<C64>) = if family == Family::Type1 {
        (Classification::IndependentTypeI, vec![alpha, alpha])
    } else {
        (Classification::IndependentTypeII, vec![alpha, beta])
    };
    if r.checker_verdict && r.classification != Some(want_class) {
        r.problems.push(format!("classified {:?}, expected {want_class:?}", r.classification));
    }
    match beurling_theta(&g.op, tol) {
        Ok(th) => {
            let z = th.zeros();
            let err = if z.len() != 2 {
                f64::INFINITY
            } else {
                let direct = (z[0] - want[0]).norm().max((z[1] - want[1]).norm());
                let swapped = (z[0] - want[1]).norm().max((z[1] - want[0]).norm());
                direct.min(swapped)
            };
            r.residuals.insert("theta_zero_error".into(), err);
            if err > ZERO_TOL {
                r.problems.push(format!("theta zeros {z:?} miss the planted pattern {want:?}"));
            }
            if family == Family::Type1 && !th.double_zero {
                r.problems.push("Type I instance without a double zero".into());
            }
        }
        Err(e) => r.problems.push(format!("beurling_theta: {e}")),
    }
    Ok(r)
}

fn cnu_trial(rng: &mut ChaCha8Rng, pass: bool, tol: &Tolerances) -> Result<TrialRecord> {
    let k = rng.gen_range(1..=4);
    let a0 = disk(rng, 0.9);
    let mut rest: Vec<C64> = vec![C64::new(0.0, 0.0); k];
    if !pass {
        for x in rest.iter_mut() {
            *x = if rng.gen_bool(0.5) { disk(rng, 0.3) } else { C64::new(0.0, 0.0) };
        }
        if rest.iter().all(|x| x.norm() == 0.0) {
            let j = rng.gen_range(0..k);
            rest[j] = polar_in(rng, 0.01, 0.3);
        }
    }
    let build = |scale: f64| -> Result<(TruncOperator, Value, Vec<C64>)> {
        let mut alphas = vec![a0];
        alphas.extend(rest.iter().map(|x| x * scale));
        let total: f64 = alphas.iter().map(|x| x.norm_sqr()).sum();
        if total >= 0.99 {
            let f = (0.99 / total).sqrt();
            alphas.iter_mut().for_each(|x| *x *= f);
        }
        let spec = OperatorSpec::Dim1Cnu { alphas: alphas.clone(), n: Truncation::Auto };
        let spec = spec.with_truncation(Truncation::Fixed(spec.resolve_truncation(tol)?));
        Ok((spec.build(tol)?, spec.to_json(), alphas))
    };
    let (t, spec, alphas) = if pass {
        build(1.0)?
    } else {
        let mut scale = 1.0;
        loop {
            let out = build(scale)?;
            if operators::scaled_quasinormal_residual(&out.0)? >= FAIL_MARGIN * tol.residual || scale > 1e3 {
                break out;
            }
            scale *= 2.0;
        }
    };
    let mut r = TrialRecord::new(0, 0, Family::CnuDim1, if pass { "pass" } else { "nonzero_tail_alphas" });
    r.instance_spec = spec;
    let res = oracle(&t, &mut r)?;
    r.oracle_verdict = res <= tol.residual;
    let predicate = alphas[1..].iter().all(|x| x.norm() == 0.0);
    match split_cnu(&t, tol) {
        Ok(c) => absorb(&mut r, &check_cnu_quasinormal(&c, tol)),
        Err(e) => r.problems.push(format!("split_cnu: {e}")),
    }
    if predicate != r.oracle_verdict {
        r.problems.push(format!("predicate alpha_1..k = 0 is {predicate}, oracle says {}", r.oracle_verdict));
    }
    if !pass && res < FAIL_MARGIN * tol.residual {
        r.problems.push(format!("control residual {res:.3e} below the calibration margin"));
    }
    Ok(r)
}

/// Planted `D (+) S_k`: random moduli with multiplicities, random phases.
pub fn planted_entries(rng: &mut ChaCha8Rng) -> (Vec<C64>, Vec<(f64, usize)>) {
    let groups = rng.gen_range(1..=3);
    let mut moduli: Vec<f64> = Vec::new();
    while moduli.len() < groups {
        let b = rng.gen_range(0.05..0.95);
        if moduli.iter().all(|m| (m - b).abs() >= 0.08) {
            moduli.push(b);
        }
    }
    if rng.gen_bool(0.3) {
        moduli.push(0.0);
    }
    moduli.sort_by(f64::total_cmp);
    let mut entries = Vec::new();
    let mut planted = Vec::new();
    for &b in &moduli {
        let mult = rng.gen_range(1..=3);
        for _ in 0..mult {
            entries.push(C64::from_polar(b, rng.gen_range(0.0..TAU)));
        }
        planted.push((b, mult));
    }
    (entries, planted)
}

/// Compares an extracted form against the planted entries; returns the worst modulus/phase error.
pub fn recovery_error(t: &TruncOperator, entries: &[C64], planted: &[(f64, usize)], tol: &Tolerances) -> Result<f64> {
    let f = extract_decomposition(t, tol)?;
    if f.moduli.len() != planted.len() || f.moduli.iter().zip(planted).any(|(a, b)| a.1 != b.1) {
        return Err(Error::Numerical(format!("moduli {:?} differ from planted {planted:?}", f.moduli)));
    }
    let mut worst: f64 = 0.0;
    let mut start = 0;
    for ((beta, mult), (pb, _)) in f.moduli.iter().zip(planted) {
        worst = worst.max((beta - pb).abs());
        if *pb > 0.0 {
            let got = &f.diag_entries[start..start + mult];
            for e in entries.iter().filter(|e| (e.norm() - pb).abs() < 1e-12) {
                let best = got.iter().map(|g| circ(g.arg(), e.arg())).fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
        }
        start += mult;
    }
    Ok(worst)
}

fn synth_trial(rng: &mut ChaCha8Rng, pass: bool, tol: &Tolerances) -> Result<TrialRecord> {
    let k = rng.gen_range(1..=3);
    let (mut entries, mut planted) = planted_entries(rng);
    if !pass && planted.len() < 2 {
        let b = if planted[0].0 > 0.5 { 0.2 } else { 0.8 };
        entries.push(C64::from_polar(b, rng.gen_range(0.0..TAU)));
        planted.push((b, 1));
    }
    let s = synthesize(&entries, &IsometryKind::Shift(k), SYNTH_N)?;
    let (t, spec) = if pass {
        (s.op.clone(), OperatorSpec::DirectSum { diag: entries.clone(), shift: k, n: Truncation::Fixed(SYNTH_N) }.to_json())
    } else {
        // couple two slots of different modulus
        let i = 0;
        let j = entries.iter().position(|e| (e.norm() - entries[0].norm()).abs() > 0.05).unwrap_or(entries.len() - 1);
        let d = entries.len();
        let (t, spec, _) = calibrated(tol, 1e-3, |delta| {
            let mut m: CMat = s.op.matrix().clone();
            m[(i, j)] += C64::new(delta, 0.0);
            let spec = OperatorSpec::Matrix { rows: m.clone(), growth: k, support: d };
            Ok((TruncOperator::with_layout(m, k, d)?, spec.to_json()))
        })?;
        (t, spec)
    };
    let mut r = TrialRecord::new(0, 0, Family::Synthesize, if pass { "pass" } else { "non_normal_block" });
    r.instance_spec = spec;
    let res = oracle(&t, &mut r)?;
    r.oracle_verdict = res <= tol.residual;
    match check_polar_commutation(&t, tol) {
        Ok(rep) => absorb(&mut r, &rep),
        Err(e) => r.problems.push(format!("checker error: {e}")),
    }
    if pass {
        match recovery_error(&t, &entries, &planted, tol) {
            Ok(e) => {
                r.residuals.insert("recovery_error".into(), e);
                if e > ZERO_TOL {
                    r.problems.push(format!("planted spectrum recovered only to {e:.3e}"));
                }
            }
            Err(e) => r.problems.push(format!("extract_decomposition: {e}")),
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("nope".parse::<Family>().is_err());
    }

    #[test]
    fn zero_trials_is_an_error() {
        assert!(equivalence_suite(Family::Dependent, 0, 1, &Tolerances::default()).is_err());
    }

    #[test]
    fn seeds_are_reproducible() {
        let tol = Tolerances::default();
        let a = run_trial(Family::CnuDim1, 3, 99, &tol);
        let b = run_trial(Family::CnuDim1, 3, 99, &tol);
        assert_eq!(a.instance_spec, b.instance_spec);
        assert_eq!(a.residuals, b.residuals);
    }
}
