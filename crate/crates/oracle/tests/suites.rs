use std::time::Instant;

use quasinormal::Tolerances;
use quasinormal_oracle::{equivalence_suite, Family};

fn run(family: Family, trials: usize, seed: u64) {
    let start = Instant::now();
    let s = equivalence_suite(family, trials, seed, &Tolerances::default()).unwrap();
    let failures = s.failures();
    for f in &failures {
        let mut j = f.to_json();
        j.as_object_mut().unwrap().remove("instance_spec");
        eprintln!("{}", serde_json::to_string(&j).unwrap());
    }
    eprintln!("{family}: {}/{} agree in {:?}", s.agreements(), trials, start.elapsed());
    assert!(failures.is_empty(), "{} failing trials in {family}", failures.len());
}

#[test]
fn dependent_suite_small() {
    run(Family::Dependent, 12, 11);
}

#[test]
fn independent_suite_small() {
    run(Family::Independent, 12, 12);
}

#[test]
fn type1_suite_small() {
    run(Family::Type1, 8, 13);
}

#[test]
fn type2_suite_small() {
    run(Family::Type2, 8, 14);
}

#[test]
fn cnu_suite_small() {
    run(Family::CnuDim1, 12, 15);
}

#[test]
fn synthesize_suite_small() {
    run(Family::Synthesize, 12, 16);
}
