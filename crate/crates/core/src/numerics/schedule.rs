use serde::{Deserialize, Serialize};

/// Half-cosine decay from `base` at step 0 to zero at `total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineSchedule {
    pub base: f64,
    pub total: u64,
}

impl CosineSchedule {
    pub fn new(base: f64, total: u64) -> Self {
        CosineSchedule { base, total }
    }

    /// Learning rate at `step`; steps past the end clamp to zero.
    pub fn lr(&self, step: u64) -> f64 {
        if self.total == 0 || step >= self.total {
            return if step == 0 { self.base } else { 0.0 };
        }
        let frac = step as f64 / self.total as f64;
        self.base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}
