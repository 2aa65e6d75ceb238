use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::spec::{NoiseKind, SdeSpec};
use crate::error::{Error, Result};
use crate::par::map_indices;
use crate::rng::{stream, StreamRng};

/// How each trajectory's starting point is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    /// Independent Uniform(low_k, high_k) per coordinate.
    Uniform {
        low: Vec<f64>,
        high: Vec<f64>,
    },
    Fixed(Vec<f64>),
}

impl InitialCondition {
    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Uniform { low, .. } => low.len(),
            InitialCondition::Fixed(x) => x.len(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: self.dim(),
            });
        }
        if let InitialCondition::Uniform { low, high } = self {
            if low.len() != high.len() || low.iter().zip(high).any(|(l, h)| !(l < h)) {
                return Err(Error::config("uniform initial region needs low < high"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            InitialCondition::Uniform { low, high } => low
                .iter()
                .zip(high)
                .map(|(&l, &h)| rng.random_range(l..h))
                .collect(),
            InitialCondition::Fixed(x) => x.clone(),
        }
    }
}

/// `n_traj` recorded paths of `n_steps + 1` states each.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub dim: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    /// Row-major `(trajectory, time, coordinate)`.
    pub data: Vec<f64>,
    /// Trajectories dropped because they left the finite range.
    pub excluded: usize,
}

impl TrajectorySet {
    pub fn n_traj(&self) -> usize {
        self.data.len() / ((self.n_steps + 1) * self.dim)
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn state(&self, traj: usize, step: usize) -> &[f64] {
        let start = (traj * (self.n_steps + 1) + step) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn trajectory(&self, traj: usize) -> &[f64] {
        let len = (self.n_steps + 1) * self.dim;
        &self.data[traj * len..(traj + 1) * len]
    }
}

/// Euler-Maruyama simulation recorded at every step:
/// `x_{k+1} = x_k + mu(x_k) dt + sigma(x_k) xi_k sqrt(dt)`, with `xi_k` standard
/// normal or Exp(1) according to the spec's noise kind.
///
/// Trajectory `j` draws from random stream `j` of `seed`, so results do not depend
/// on thread count. Trajectories that go non-finite are excluded and counted.
pub fn euler_maruyama(
    spec: &SdeSpec,
    init: &InitialCondition,
    dt: f64,
    n_steps: usize,
    n_traj: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    simulate(spec, init, dt, n_steps, n_traj, seed, 1)
}

/// Like [`euler_maruyama`], but integrates with `substeps` internal steps of size
/// `dt / substeps` between recorded states.
pub fn simulate(
    spec: &SdeSpec,
    init: &InitialCondition,
    dt: f64,
    n_steps: usize,
    n_traj: usize,
    seed: u64,
    substeps: usize,
) -> Result<TrajectorySet> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if n_steps == 0 || n_traj == 0 || substeps == 0 {
        return Err(Error::config(
            "step count, trajectory count and substeps must be at least 1",
        ));
    }
    init.validate(spec.dim())?;

    let paths = map_indices(n_traj, |j| {
        let mut rng = stream(seed, j as u64);
        integrate_path(spec, init, dt, n_steps, substeps, &mut rng)
    });
    let excluded = paths.iter().filter(|p| p.is_none()).count();
    if excluded == n_traj {
        return Err(Error::numerical(format!(
            "all {n_traj} trajectories diverged"
        )));
    }
    if excluded > 0 {
        log::warn!("{excluded} of {n_traj} trajectories diverged and were excluded");
    }
    let data: Vec<f64> = paths.into_iter().flatten().flatten().collect();
    Ok(TrajectorySet {
        dim: spec.dim(),
        n_steps,
        dt,
        seed,
        data,
        excluded,
    })
}

fn integrate_path(
    spec: &SdeSpec,
    init: &InitialCondition,
    dt: f64,
    n_steps: usize,
    substeps: usize,
    rng: &mut StreamRng,
) -> Option<Vec<f64>> {
    let d = spec.dim();
    let m = spec.noise_dim();
    let h = dt / substeps as f64;
    let sqrt_h = h.sqrt();
    let mut path = Vec::with_capacity((n_steps + 1) * d);
    let mut x = init.sample(rng);
    path.extend_from_slice(&x);
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * m];
    let mut xi = vec![0.0; m];
    for _ in 0..n_steps {
        for _ in 0..substeps {
            spec.drift_into(&x, &mut mu);
            spec.diffusion_into(&x, &mut sigma);
            for v in xi.iter_mut() {
                *v = match spec.noise() {
                    NoiseKind::Gaussian => StandardNormal.sample(rng),
                    NoiseKind::Exponential => Exp1.sample(rng),
                };
            }
            for k in 0..d {
                let forcing: f64 = (0..m).map(|l| sigma[k * m + l] * xi[l]).sum();
                x[k] += mu[k] * h + forcing * sqrt_h;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        path.extend_from_slice(&x);
    }
    Some(path)
}
