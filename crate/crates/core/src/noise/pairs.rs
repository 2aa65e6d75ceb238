use std::io::{Read, Write};

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ode::{mc_score_into, reverse_ode_solve, reverse_tail};
use super::residuals::ResidualSet;
use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::par::map_indices;
use crate::rng::{derive_seed, stream};

/// Settings for constructing `(z, y)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub n_pairs: usize,
    /// Euler steps of each reverse solve; the endpoint clamp is `1 / steps`.
    pub steps: usize,
    /// Residuals drawn for the score estimate of each solve.
    pub minibatch: usize,
    /// Larger residual sets are subsampled to this size first.
    pub max_residuals: usize,
    pub seed: u64,
    /// Halving steps taken below the clamp level after the Euler solve.
    pub tail_steps: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            n_pairs: 10_000,
            steps: 10_000,
            minibatch: 1_000,
            max_residuals: 100_000,
            seed: 0,
            tail_steps: 20,
        }
    }
}

/// Supervised pairs: standard normal inputs and their reverse-solve images.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairs {
    pub dim: usize,
    /// Row-major `n x dim`.
    pub inputs: Vec<f64>,
    /// Row-major `n x dim`.
    pub targets: Vec<f64>,
    pub meta: PairMeta,
}

/// JSON sidecar of a persisted [`LabeledPairs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "K")]
    pub steps: usize,
    pub delta: f64,
    pub seed: u64,
    pub minibatch: usize,
    #[serde(default)]
    pub tail_steps: usize,
}

impl LabeledPairs {
    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Raw little-endian `f64` payload: all inputs, then all targets.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        for v in self.inputs.iter().chain(&self.targets) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)?)
    }

    pub fn read(mut binary: impl Read, sidecar: &str) -> Result<Self> {
        let meta: PairMeta = serde_json::from_str(sidecar)?;
        let mut bytes = Vec::new();
        binary.read_to_end(&mut bytes)?;
        let count = meta.n * meta.d;
        if meta.d == 0 || bytes.len() != 16 * count {
            return Err(Error::Parse(format!(
                "pair payload has {} bytes, sidecar implies {}",
                bytes.len(),
                16 * count
            )));
        }
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(LabeledPairs {
            dim: meta.d,
            inputs: vals[..count].to_vec(),
            targets: vals[count..].to_vec(),
            meta,
        })
    }
}

/// Draws `n_pairs` inputs `z ~ N(0, I)` and maps each through the reverse
/// probability-flow solve, using a fresh residual minibatch per solve.
/// Pair `j` uses random stream `j`, so the result does not depend on scheduling.
pub fn build_pairs(residuals: &ResidualSet, cfg: &PairConfig) -> Result<LabeledPairs> {
    if cfg.n_pairs == 0 {
        return Err(Error::config("pair count must be at least 1"));
    }
    if residuals.is_empty() {
        return Err(Error::config("residual set is empty"));
    }
    if cfg.minibatch == 0 {
        return Err(Error::config("score minibatch must be at least 1"));
    }
    let schedule = DiffusionSchedule::for_steps(cfg.steps)?;
    let d = residuals.dim;
    let pool: Vec<f64> = if residuals.len() > cfg.max_residuals && cfg.max_residuals > 0 {
        let mut rng = stream(derive_seed(cfg.seed, 0x7375_6273), 0);
        let mut keep = index::sample(&mut rng, residuals.len(), cfg.max_residuals).into_vec();
        keep.sort_unstable();
        keep.iter()
            .flat_map(|&j| residuals.row(j).iter().copied())
            .collect()
    } else {
        residuals.samples.clone()
    };
    let n_pool = pool.len() / d;
    let mb = cfg.minibatch.min(n_pool);

    let solved = map_indices(cfg.n_pairs, |j| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = stream(cfg.seed, j as u64);
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let batch: Vec<f64> = if mb == n_pool {
            pool.clone()
        } else {
            index::sample(&mut rng, n_pool, mb)
                .iter()
                .flat_map(|i| pool[i * d..(i + 1) * d].iter().copied())
                .collect()
        };
        let mut scratch = Vec::with_capacity(mb);
        let y = reverse_ode_solve(&z, &schedule, cfg.steps, |x, tau, out| {
            mc_score_into(x, tau, &batch, &schedule, &mut scratch, out)
        })?;
        let y = reverse_tail(&y, &schedule, cfg.tail_steps, |x, tau, out| {
            mc_score_into(x, tau, &batch, &schedule, &mut scratch, out)
        })?;
        Ok((z, y))
    });
    let mut inputs = Vec::with_capacity(cfg.n_pairs * d);
    let mut targets = Vec::with_capacity(cfg.n_pairs * d);
    for r in solved {
        let (z, y) = r?;
        inputs.extend(z);
        targets.extend(y);
    }
    Ok(LabeledPairs {
        dim: d,
        inputs,
        targets,
        meta: PairMeta {
            n: cfg.n_pairs,
            d,
            steps: cfg.steps,
            delta: schedule.delta,
            seed: cfg.seed,
            minibatch: mb,
            tail_steps: cfg.tail_steps,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> PairConfig {
        PairConfig {
            n_pairs: 5,
            steps: 50,
            minibatch: 4,
            max_residuals: 100,
            seed: 3,
            tail_steps: 20,
        }
    }

    #[test]
    fn counts_determinism_and_errors() {
        let res = ResidualSet::new(1, vec![0.1, -0.2, 0.05, 0.3, 0.0, -0.1]).unwrap();
        let a = build_pairs(&res, &small_cfg()).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, build_pairs(&res, &small_cfg()).unwrap());
        let zero = PairConfig {
            n_pairs: 0,
            ..small_cfg()
        };
        assert!(build_pairs(&res, &zero).is_err());
    }

    #[test]
    fn binary_and_sidecar_round_trip() {
        let res = ResidualSet::new(2, vec![0.1, -0.2, 0.05, 0.3]).unwrap();
        let pairs = build_pairs(&res, &small_cfg()).unwrap();
        let mut bin = Vec::new();
        pairs.write_binary(&mut bin).unwrap();
        let side = pairs.sidecar_json().unwrap();
        assert!(side.contains("\"K\": 50"));
        let back = LabeledPairs::read(bin.as_slice(), &side).unwrap();
        assert_eq!(back, pairs);
        assert!(LabeledPairs::read(&bin[..8], &side).is_err());
    }
}
