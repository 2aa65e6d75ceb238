use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `f(x, out)`: writes a vector- or matrix-valued function of the state into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Distribution of the per-step forcing `xi` in `x + mu dt + sigma xi sqrt(dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Standard normal increments.
    Gaussian,
    /// Exp(1) increments (mean 1, not centered).
    Exponential,
}

impl NoiseKind {
    pub fn mean(self) -> f64 {
        match self {
            NoiseKind::Gaussian => 0.0,
            NoiseKind::Exponential => 1.0,
        }
    }

    pub fn std(self) -> f64 {
        1.0
    }
}

/// `dx = mu(x) dt + sigma(x) dW` with `mu: R^d -> R^d`, `sigma: R^d -> R^{d x m}`.
#[derive(Clone)]
pub struct SdeSpec {
    dim: usize,
    noise_dim: usize,
    drift: VectorField,
    diffusion: VectorField,
    noise: NoiseKind,
}

impl fmt::Debug for SdeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSpec")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

impl SdeSpec {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: VectorField,
        diffusion: VectorField,
        noise: NoiseKind,
    ) -> Result<Self> {
        if dim == 0 || noise_dim == 0 {
            return Err(Error::config("SDE dimensions must be positive"));
        }
        Ok(SdeSpec {
            dim,
            noise_dim,
            drift,
            diffusion,
            noise,
        })
    }

    /// Constant diagonal diffusion `diag(sigmas)`.
    pub fn with_diagonal_noise(
        drift: VectorField,
        sigmas: Vec<f64>,
        noise: NoiseKind,
    ) -> Result<Self> {
        let dim = sigmas.len();
        let diffusion: VectorField = Arc::new(move |_x, out| {
            out.fill(0.0);
            for (k, s) in sigmas.iter().enumerate() {
                out[k * dim + k] = *s;
            }
        });
        SdeSpec::new(dim, dim, drift, diffusion, noise)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    /// Diffusion matrix at `x`, row-major `d x m`.
    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.noise_dim];
        self.diffusion_into(x, &mut out);
        out
    }
}
