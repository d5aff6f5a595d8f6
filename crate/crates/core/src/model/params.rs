use serde::{Deserialize, Serialize};

use crate::{DphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Coupling of user codes to their delegate.
    pub alpha: f64,
    /// Coupling of item codes to their delegate.
    pub beta: f64,
    /// Weight of the content term.
    pub lambda: f64,
    /// Code length in bits.
    pub r: usize,
    pub outer_iters: usize,
    pub dcd_max_passes: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 1e-5,
            beta: 1e-3,
            lambda: 20.0,
            r: 16,
            outer_iters: 50,
            dcd_max_passes: 3,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(DphError::InvalidArgument(format!("{name} must be >= 0, got {v}")))
            }
        };
        finite_nonneg("alpha", self.alpha)?;
        finite_nonneg("beta", self.beta)?;
        finite_nonneg("lambda", self.lambda)?;
        if self.r == 0 {
            return Err(DphError::InvalidArgument("code length r must be >= 1".into()));
        }
        if self.dcd_max_passes == 0 {
            return Err(DphError::InvalidArgument("dcd_max_passes must be >= 1".into()));
        }
        Ok(())
    }
}
