//! Cosine learning-rate decay over a fixed number of optimizer steps.

use crate::error::{Error, Result};

/// Cosine schedule descriptor: eta(step) anneals from `eta_max` at step 0
/// down to `eta_min` at `step_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub eta_min: f64,
    pub eta_max: f64,
    pub step_final: u64,
}

impl LrSchedule {
    pub fn new(eta_min: f64, eta_max: f64, step_final: u64) -> Result<Self> {
        if step_final == 0 {
            return Err(Error::InvalidConfig("schedule step_final must be > 0".into()));
        }
        if !(eta_min.is_finite() && eta_max.is_finite()) || eta_min < 0.0 || eta_max < eta_min {
            return Err(Error::InvalidConfig(format!(
                "schedule needs 0 <= eta_min <= eta_max, got eta_min={eta_min}, eta_max={eta_max}"
            )));
        }
        Ok(LrSchedule {
            eta_min,
            eta_max,
            step_final,
        })
    }

    /// eta = eta_min + (eta_max - eta_min) * (1 + cos(pi * step / step_final)) / 2.
    pub fn lr_at(&self, step_current: u64) -> Result<f64> {
        if step_current > self.step_final {
            return Err(Error::InvalidConfig(format!(
                "schedule queried at step {step_current} past step_final {}",
                self.step_final
            )));
        }
        let frac = step_current as f64 / self.step_final as f64;
        Ok(self.eta_min + 0.5 * (self.eta_max - self.eta_min) * (1.0 + (std::f64::consts::PI * frac).cos()))
    }
}
