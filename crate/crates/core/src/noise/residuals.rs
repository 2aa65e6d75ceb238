use crate::error::{Error, Result};
use crate::expr::ExpressionInstance;
use crate::sde::TransitionPairs;

/// Noise left after the learned drift: `r = x_{t+dt} - x_t - dt * D(x_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub dim: usize,
    /// Row-major `n x dim`.
    pub samples: Vec<f64>,
    /// Pairs whose drift evaluation was not finite.
    pub dropped: usize,
}

impl ResidualSet {
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 || samples.len() % dim != 0 {
            return Err(Error::Shape {
                expected: dim,
                actual: samples.len(),
            });
        }
        Ok(ResidualSet {
            dim,
            samples,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dim..(j + 1) * self.dim]
    }
}

/// Residuals of every pair under the per-coordinate drift expressions.
pub fn residuals(pairs: &TransitionPairs, drift: &[ExpressionInstance]) -> Result<ResidualSet> {
    if drift.len() != pairs.dim {
        return Err(Error::Shape {
            expected: pairs.dim,
            actual: drift.len(),
        });
    }
    let d = pairs.dim;
    let mut samples = Vec::with_capacity(pairs.current.len());
    let mut row = vec![0.0; d];
    let mut dropped = 0;
    for j in 0..pairs.len() {
        let (x, y) = (pairs.x(j), pairs.y(j));
        for k in 0..d {
            row[k] = y[k] - x[k] - pairs.dt * drift[k].value(x);
        }
        if row.iter().all(|v| v.is_finite()) {
            samples.extend_from_slice(&row);
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} pairs with non-finite drift evaluations");
    }
    Ok(ResidualSet {
        dim: d,
        samples,
        dropped,
    })
}
