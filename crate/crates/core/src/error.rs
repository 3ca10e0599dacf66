use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient truncation: need N >= {needed}, have {have}")]
    InsufficientTruncation { needed: usize, have: usize },

    #[error("tail bound overflow: {0}")]
    TailOverflow(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("subspace is not invariant (residual {residual:.3e})")]
    NotInvariant { residual: f64 },

    #[error("no solution found: {0}")]
    NoSolution(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
