//! Brute-force ground truth and the randomized checker/oracle agreement suites.

pub mod brute;
pub mod suite;

pub use brute::{brute_kernel, brute_residual};
pub use suite::{equivalence_suite, Family, SuiteSummary, TrialRecord};
