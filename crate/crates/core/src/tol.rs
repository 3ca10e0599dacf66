use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Numerical thresholds shared by every check.
///
/// `tail <= rank <= residual` is enforced by [`Tolerances::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub residual: f64,
    pub group: f64,
    pub rank: f64,
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: 1e-8, group: 1e-7, rank: 1e-10, tail: 1e-12 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("residual", self.residual),
            ("group", self.group),
            ("rank", self.rank),
            ("tail", self.tail),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return invalid(format!("tolerance {name} must be positive and finite, got {x}"));
            }
        }
        if !(self.tail <= self.rank && self.rank <= self.residual) {
            return invalid(format!(
                "tolerances must satisfy tail <= rank <= residual (got {:e}, {:e}, {:e})",
                self.tail, self.rank, self.residual
            ));
        }
        Ok(())
    }

    pub fn with_residual(mut self, r: f64) -> Self {
        self.residual = r;
        self
    }

    pub fn with_rank(mut self, r: f64) -> Self {
        self.rank = r;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ordering_holds() {
        Tolerances::default().validate().unwrap();
    }

    #[test]
    fn rejects_inverted_ordering() {
        let t = Tolerances::default().with_rank(1e-6);
        assert!(t.validate().is_err());
        let t = Tolerances { tail: 0.0, ..Default::default() };
        assert!(t.validate().is_err());
    }
}
