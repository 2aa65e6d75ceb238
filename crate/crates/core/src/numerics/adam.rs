use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay coefficient, applied as `p -= lr * wd * p`.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }
}

/// Whether an optimizer step was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Applied,
    /// The gradient had non-finite entries; parameters and moments are untouched.
    RejectedNonFinite,
}

/// Adam with bias correction and optional decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Adam {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<StepStatus> {
        let lr = self.config.lr;
        self.step_with_lr(params, grads, lr)
    }

    /// One update with an explicit learning rate (for schedules).
    pub fn step_with_lr(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
    ) -> Result<StepStatus> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape {
                expected: self.m.len(),
                actual: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Ok(StepStatus::RejectedNonFinite);
        }
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            if weight_decay > 0.0 {
                params[i] -= lr * weight_decay * params[i];
            }
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(StepStatus::Applied)
    }
}

/// Plain gradient descent, available as an alternative first-order optimizer.
#[derive(Debug, Clone, Copy)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn step(&self, params: &mut [f64], grads: &[f64], lr: f64) -> StepStatus {
        if grads.iter().any(|g| !g.is_finite()) {
            return StepStatus::RejectedNonFinite;
        }
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= lr * g;
        }
        StepStatus::Applied
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut adam = Adam::new(AdamConfig::new(1e-2), 3);
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..10 {
            adam.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let lr = 8e-3;
        let mut adam = Adam::new(AdamConfig::new(lr), 1);
        let mut p = vec![0.0];
        adam.step(&mut p, &[1.0]).unwrap();
        let want = -lr * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - want).abs() < 1e-15);
        // repeated unit gradient keeps the step size at lr
        adam.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] - 2.0 * want).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_shrinks_toward_zero() {
        let mut adam = Adam::new(AdamConfig::new(1e-2).with_weight_decay(1e-6), 2);
        let mut p = vec![3.0, -3.0];
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert!(p[0] < 3.0 && p[0] > 0.0);
        assert!(p[1] > -3.0 && p[1] < 0.0);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut adam = Adam::new(AdamConfig::new(1e-2), 1);
        let mut p = vec![1.0];
        assert_eq!(
            adam.step(&mut p, &[f64::NAN]).unwrap(),
            StepStatus::RejectedNonFinite
        );
        assert_eq!(p, vec![1.0]);
        assert_eq!(adam.steps_taken(), 0);
        assert!(adam.step(&mut p, &[1.0, 2.0]).is_err());
    }
}
