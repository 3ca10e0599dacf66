pub mod blaschke;
pub mod cnu;
pub mod error;
pub mod funcspec;
pub mod hardy;
pub mod linalg;
pub mod operators;
pub mod opspec;
pub mod rank_one;
pub mod report;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use tol::Tolerances;
