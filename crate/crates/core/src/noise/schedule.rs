use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forward noising `Z_tau = alpha_tau r + beta_tau eps` with `alpha = 1 - tau`,
/// `beta^2 = tau`, and the matching SDE coefficients
/// `b(tau) = d log(alpha)/d tau` and `sigma^2(tau) = d beta^2/d tau - 2 b beta^2`.
///
/// Both coefficients are singular at `tau = 1`, so times are restricted to
/// `[delta, 1 - delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub delta: f64,
}

impl DiffusionSchedule {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::config(format!(
                "endpoint clamp must lie in (0, 0.5), got {delta}"
            )));
        }
        Ok(DiffusionSchedule { delta })
    }

    /// Clamp `delta = 1 / steps`.
    pub fn for_steps(steps: usize) -> Result<Self> {
        if steps < 3 {
            return Err(Error::config("the reverse solve needs at least 3 steps"));
        }
        DiffusionSchedule::new(1.0 / steps as f64)
    }

    pub fn alpha(&self, tau: f64) -> f64 {
        1.0 - tau
    }

    pub fn beta2(&self, tau: f64) -> f64 {
        tau
    }

    pub fn drift_coef(&self, tau: f64) -> f64 {
        -1.0 / (1.0 - tau)
    }

    pub fn diffusion2(&self, tau: f64) -> f64 {
        1.0 + 2.0 * tau / (1.0 - tau)
    }

    /// Errors unless `0 < tau <= 1 - delta`.
    pub fn check(&self, tau: f64) -> Result<()> {
        if tau > 0.0 && tau <= 1.0 - self.delta + 1e-12 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "diffusion time {tau} outside (0, {}]",
                1.0 - self.delta
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_match_finite_differences_of_alpha_and_beta() {
        let s = DiffusionSchedule::new(1e-3).unwrap();
        let h = 1e-6;
        for tau in [0.1, 0.3, 0.5, 0.9] {
            let dlog_alpha = (s.alpha(tau + h).ln() - s.alpha(tau - h).ln()) / (2.0 * h);
            let dbeta2 = (s.beta2(tau + h) - s.beta2(tau - h)) / (2.0 * h);
            assert!((s.drift_coef(tau) - dlog_alpha).abs() < 1e-8);
            let sigma2 = dbeta2 - 2.0 * s.drift_coef(tau) * s.beta2(tau);
            assert!((s.diffusion2(tau) - sigma2).abs() < 1e-8);
            assert!(s.diffusion2(tau) >= 0.0);
        }
    }

    #[test]
    fn time_range_is_enforced() {
        let s = DiffusionSchedule::for_steps(100).unwrap();
        assert!(s.check(0.5).is_ok());
        assert!(s.check(0.99).is_ok());
        assert!(matches!(s.check(0.995), Err(Error::Domain(_))));
        assert!(s.check(0.0).is_err());
        assert!(DiffusionSchedule::new(0.0).is_err());
    }
}
