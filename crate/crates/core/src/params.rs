use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Scalar problem parameters: sample ratio, ridge, label noise, training and
/// test attack budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub alpha: f64,
    pub lambda: f64,
    pub tau: f64,
    pub eps_t: f64,
    pub eps_g: f64,
}

impl ExperimentParams {
    pub fn new(alpha: f64, lambda: f64, tau: f64, eps_t: f64, eps_g: f64) -> Self {
        ExperimentParams { alpha, lambda, tau, eps_t, eps_g }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return domain(format!("alpha must be positive, got {}", self.alpha));
        }
        if !ok(self.lambda) || !ok(self.tau) || !ok(self.eps_t) || !ok(self.eps_g) {
            return domain("lambda, tau, eps_t and eps_g must be nonnegative and finite");
        }
        Ok(())
    }
}
