//! One line per acceptance criterion. Runs without the test harness so the
//! lines always print and the wall-clock limits are measured sequentially.

mod common;

use std::time::{Duration, Instant};

use quasinormal::hardy::HCoeffVec;
use quasinormal::operators::{self, TruncOperator};
use quasinormal::{Tolerances, C64};
use quasinormal_oracle::{brute_residual, equivalence_suite, Family, SuiteSummary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::{check_spec, golden_dir, read_json};

const S_MINUS: &str = r#"{"kind":"perturbed_shift","k":1,"u":{"poly":[[0,0],[-1,0]]},"v":{"poly":[[1,0]]},"N":128}"#;
const S_PLUS: &str = r#"{"kind":"perturbed_shift","k":1,"u":{"poly":[[0,0],[1,0]]},"v":{"poly":[[1,0]]},"N":128}"#;

struct Line {
    id: usize,
    ok: bool,
    detail: String,
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn suite(family: Family, trials: usize, seed: u64) -> (SuiteSummary, Duration) {
    let start = Instant::now();
    let s = equivalence_suite(family, trials, seed, &Tolerances::default()).expect("suite runs");
    let el = start.elapsed();
    for f in s.failures() {
        eprintln!("  {family} trial {} ({}): {:?}", f.trial, f.kind, f.problems);
    }
    (s, el)
}

fn named_examples() -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec, want_verdict) in [("S-z(x)1", S_MINUS, true), ("S+z(x)1", S_PLUS, false)] {
        let spec: Value = serde_json::from_str(spec).unwrap();
        let start = Instant::now();
        let out = check_spec(&spec);
        let el = start.elapsed();
        let r = out.report.expect("report");
        let oracle = r["residuals"]["oracle"].as_f64().unwrap_or(f64::NAN);
        let hypo = r["residuals"]["hyponormal_min_eig"].as_f64().unwrap_or(f64::NAN);
        let good = if want_verdict {
            r["verdict"] == true && oracle <= 1e-8
        } else {
            r["verdict"] == false && r["classification"] == "not-quasinormal" && hypo < -1e-3
        };
        ok &= good && el < Duration::from_secs(1);
        parts.push(format!("{name}: verdict {} oracle {oracle:.1e} hypo {hypo:.3} in {}", r["verdict"], secs(el)));
    }
    Line { id: 1, ok, detail: parts.join("; ") }
}

fn synthesize_round_trip() -> Line {
    let (s, el) = suite(Family::Synthesize, 50, 2);
    let rec = s.max_residual("recovery_error");
    Line {
        id: 2,
        ok: s.passed() && rec <= 1e-6 && el < Duration::from_secs(30),
        detail: format!("{}/50 agree, max recovery error {rec:.1e}, {}", s.agreements(), secs(el)),
    }
}

fn cnu_equivalence() -> Line {
    let (s, el) = suite(Family::CnuDim1, 50, 3);
    Line {
        id: 3,
        ok: s.passed() && el < Duration::from_secs(10),
        detail: format!("{}/50 agree, {}", s.agreements(), secs(el)),
    }
}

fn dependent_branch() -> (Line, SuiteSummary) {
    let (s, el) = suite(Family::Dependent, 100, 4);
    let line = Line {
        id: 4,
        ok: s.passed() && el < Duration::from_secs(30),
        detail: format!("{}/100 agree, {}", s.agreements(), secs(el)),
    };
    (line, s)
}

fn independent_branch() -> (Line, Vec<SuiteSummary>) {
    let start = Instant::now();
    let runs = vec![
        suite(Family::Independent, 100, 5).0,
        suite(Family::Type1, 25, 5).0,
        suite(Family::Type2, 25, 5).0,
    ];
    let el = start.elapsed();
    let zero = runs[1].max_residual("theta_zero_error").max(runs[2].max_residual("theta_zero_error"));
    let counts: Vec<String> = runs.iter().map(|s| format!("{} {}/{}", s.family, s.agreements(), s.trials)).collect();
    let line = Line {
        id: 5,
        ok: runs.iter().all(SuiteSummary::passed) && zero <= 1e-6 && el < Duration::from_secs(60),
        detail: format!("{}, max theta zero error {zero:.1e}, {}", counts.join(", "), secs(el)),
    };
    (line, runs)
}

fn kernel_invariants(all: &[&SuiteSummary]) -> Line {
    let inv = all.iter().map(|s| s.max_residual("kernel_invariance")).fold(0.0, f64::max);
    let structural = all
        .iter()
        .flat_map(|s| &s.records)
        .flat_map(|r| &r.problems)
        .filter(|p| p.contains("m = ") || p.contains("defect") || p.contains("invarian"))
        .count();
    Line {
        id: 6,
        ok: inv <= 1e-8 && structural == 0,
        detail: format!("max S_k ker residual {inv:.1e}, {structural} structural problems"),
    }
}

fn disk(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::from_polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> HCoeffVec {
    let scale = rng.gen_range(0.1..0.8);
    if rng.gen_bool(0.5) {
        let deg = rng.gen_range(0..6);
        let c: Vec<C64> = (0..=deg).map(|_| disk(rng, 1.0)).collect();
        let norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
        HCoeffVec::polynomial(c.into_iter().map(|x| x * (scale / norm)).collect())
    } else {
        let a = disk(rng, 0.7);
        let f = HCoeffVec::szego(a, len).unwrap();
        let n = f.norm();
        f.scale(C64::new(scale / n, 0.0))
    }
}

fn self_consistency() -> Line {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let (mut defect_gap, mut dual_gap) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let k = rng.gen_range(1..=3);
        let u = random_vec(&mut rng, 256);
        let v = random_vec(&mut rng, 256);
        let t = TruncOperator::perturbed_shift(k, &u, &v, 256, &tol).expect("instance builds");
        defect_gap = defect_gap.max(operators::defect(&t, &tol).closed_form_gap.unwrap_or(f64::INFINITY));
        let scale = t.norm_bound().max(1.0).powi(3);
        let brute = brute_residual(&t).unwrap() / scale;
        let fast = operators::scaled_quasinormal_residual(&t).unwrap();
        dual_gap = dual_gap.max((brute - fast).abs());
    }
    let mut kernel_excess = 0.0f64;
    for _ in 0..200 {
        let terms: Vec<HCoeffVec> = (0..rng.gen_range(1..=3)).map(|_| random_vec(&mut rng, 160)).collect();
        let mut f = terms[0].clone();
        for g in &terms[1..] {
            f = f.add(g).unwrap();
        }
        let w = disk(&mut rng, 0.8);
        let kw = HCoeffVec::szego(w, 160).unwrap();
        let (direct, b1) = f.evaluate(w).unwrap();
        let (via_kernel, b2) = f.inner(&kw);
        let excess = (direct - via_kernel).norm() - (b1 + b2 + 1e-13);
        kernel_excess = kernel_excess.max(excess);
    }
    let el = start.elapsed();
    Line {
        id: 7,
        ok: defect_gap <= 1e-10 && kernel_excess <= 0.0 && dual_gap <= 1e-12 && el < Duration::from_secs(20),
        detail: format!(
            "defect gap {defect_gap:.1e}, kernel excess over bound {kernel_excess:.1e}, dual-path gap {dual_gap:.1e}, {}",
            secs(el)
        ),
    }
}

fn counterexample_artifacts() -> Line {
    let mut dependent = false;
    let mut independent = false;
    let mut worst = 0.0f64;
    for entry in std::fs::read_dir(golden_dir()).unwrap() {
        let p = entry.unwrap().path();
        if !p.to_string_lossy().ends_with(".report.json") {
            continue;
        }
        let r = read_json(&p);
        if r["verdict"] != true || r["spec_echo"]["k"] != 1 || r["spec_echo"]["kind"] != "perturbed_shift" {
            continue;
        }
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if !name.contains("counterexample") {
            continue;
        }
        worst = worst.max(r["residuals"]["oracle"].as_f64().unwrap_or(f64::INFINITY));
        match r["classification"].as_str() {
            Some("dependent") => dependent = true,
            Some("independent-type-I") | Some("independent-type-II") => independent = true,
            _ => {}
        }
    }
    Line {
        id: 8,
        ok: dependent && independent && worst <= 1e-10,
        detail: format!("dependent {dependent}, type I/II {independent}, max oracle {worst:.1e}"),
    }
}

fn main() -> std::process::ExitCode {
    let mut lines = vec![named_examples(), synthesize_round_trip(), cnu_equivalence()];
    let (l4, dep) = dependent_branch();
    lines.push(l4);
    let (l5, ind) = independent_branch();
    lines.push(l5);
    let all: Vec<&SuiteSummary> = std::iter::once(&dep).chain(ind.iter()).collect();
    lines.push(kernel_invariants(&all));
    lines.push(self_consistency());
    lines.push(counterexample_artifacts());
    for l in &lines {
        println!("criterion {}: {} | {}", l.id, if l.ok { "PASS" } else { "FAIL" }, l.detail);
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.ok).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", lines.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
