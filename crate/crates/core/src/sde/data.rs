use super::simulate::TrajectorySet;
use super::spec::NoiseKind;
use crate::error::{Error, Result};

/// Consecutive-time state pairs `(x_t, x_{t+dt})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPairs {
    pub dim: usize,
    pub dt: f64,
    /// Row-major `n x dim`.
    pub current: Vec<f64>,
    /// Row-major `n x dim`.
    pub next: Vec<f64>,
}

impl TransitionPairs {
    pub fn new(dim: usize, dt: f64, current: Vec<f64>, next: Vec<f64>) -> Result<Self> {
        if dim == 0 || current.len() % dim != 0 || current.len() != next.len() {
            return Err(Error::Shape {
                expected: current.len(),
                actual: next.len(),
            });
        }
        Ok(TransitionPairs {
            dim,
            dt,
            current,
            next,
        })
    }

    pub fn len(&self) -> usize {
        self.current.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn x(&self, j: usize) -> &[f64] {
        &self.current[j * self.dim..(j + 1) * self.dim]
    }

    pub fn y(&self, j: usize) -> &[f64] {
        &self.next[j * self.dim..(j + 1) * self.dim]
    }

    /// Keeps the pairs at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> TransitionPairs {
        let mut current = Vec::with_capacity(indices.len() * self.dim);
        let mut next = Vec::with_capacity(indices.len() * self.dim);
        for &j in indices {
            current.extend_from_slice(self.x(j));
            next.extend_from_slice(self.y(j));
        }
        TransitionPairs {
            dim: self.dim,
            dt: self.dt,
            current,
            next,
        }
    }
}

/// Pairs every state with its successor inside each trajectory: `n_traj * n_steps` pairs.
pub fn make_pairs(traj: &TrajectorySet) -> TransitionPairs {
    let d = traj.dim;
    let n = traj.n_traj() * traj.n_steps;
    let mut current = Vec::with_capacity(n * d);
    let mut next = Vec::with_capacity(n * d);
    for j in 0..traj.n_traj() {
        let path = traj.trajectory(j);
        current.extend_from_slice(&path[..traj.n_steps * d]);
        next.extend_from_slice(&path[d..]);
    }
    TransitionPairs {
        dim: d,
        dt: traj.dt,
        current,
        next,
    }
}

/// Scalar regression problem `targets[j] ~ f(inputs[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSet {
    pub dim: usize,
    /// Row-major `n x dim`.
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl RegressionSet {
    pub fn new(dim: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || inputs.len() != targets.len() * dim {
            return Err(Error::Shape {
                expected: targets.len() * dim.max(1),
                actual: inputs.len(),
            });
        }
        Ok(RegressionSet {
            dim,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.dim..(j + 1) * self.dim]
    }
}

/// Finite-difference drift targets for output coordinate `i`:
/// `y = (x_{t+dt,i} - x_{t,i}) / dt - center`.
///
/// `center` is the mean of the forcing term expressed in target units (zero for
/// centered noise). Pairs with non-finite targets are dropped.
pub fn drift_targets(pairs: &TransitionPairs, i: usize, center: f64) -> Result<RegressionSet> {
    if i >= pairs.dim {
        return Err(Error::config(format!(
            "output dimension {i} out of range for {}-dimensional pairs",
            pairs.dim
        )));
    }
    if pairs.dt == 0.0 || !pairs.dt.is_finite() {
        return Err(Error::config("pair time step must be non-zero"));
    }
    let mut inputs = Vec::with_capacity(pairs.current.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for j in 0..pairs.len() {
        let y = (pairs.y(j)[i] - pairs.x(j)[i]) / pairs.dt - center;
        if y.is_finite() {
            inputs.extend_from_slice(pairs.x(j));
            targets.push(y);
        }
    }
    Ok(RegressionSet {
        dim: pairs.dim,
        inputs,
        targets,
    })
}

/// Estimated mean of the forcing in target units, from the residual targets
/// `y - f(x)` of a fitted drift.
///
/// A fit with a free constant absorbs the forcing mean, so the mean of the
/// residuals carries no information about it. Instead the residual spread is
/// measured and converted through the known mean-to-std ratio of the noise law.
pub fn forcing_center(residual_targets: &[f64], kind: NoiseKind) -> f64 {
    let n = residual_targets.len();
    if n < 2 || kind.mean() == 0.0 {
        return 0.0;
    }
    let mean = residual_targets.iter().sum::<f64>() / n as f64;
    let var = residual_targets
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    var.sqrt() * kind.mean() / kind.std()
}
