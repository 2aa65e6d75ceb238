//! Run settings per benchmark at full or reduced scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{DecoderConfig, PairConfig};
use crate::sde::benchmark;
use crate::search::{RefineConfig, ScoreConfig, SearchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Published data sizes and iteration counts.
    Paper,
    /// Reduced sizes that finish on a single workstation.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::config(format!(
                "unknown scale `{other}`; expected desk or paper"
            ))),
        }
    }
}

/// Everything needed to run one benchmark end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub n_traj: usize,
    pub search: SearchConfig,
    pub pairs: PairConfig,
    pub decoder: DecoderConfig,
    /// Realizations per rollout.
    pub ensemble: usize,
    /// One-step samples per point of an effective-coefficient sweep.
    pub sweep_samples: usize,
}

pub fn preset(name: &str, scale: Scale) -> Result<Preset> {
    let b = benchmark(name)?;
    Ok(match scale {
        Scale::Paper => Preset {
            n_traj: b.n_traj,
            search: SearchConfig {
                iterations: b.search_iterations,
                ..SearchConfig::default()
            },
            pairs: PairConfig::default(),
            decoder: DecoderConfig::default(),
            ensemble: 100_000,
            sweep_samples: 100_000,
        },
        Scale::Desk => Preset {
            n_traj: if b.dim() > 1 { 5_000 } else { 2_000 },
            search: SearchConfig {
                iterations: match name {
                    "ou" => 150,
                    "double_well" => 600,
                    _ => b.search_iterations,
                },
                score: ScoreConfig {
                    iterations: 3_000,
                    minibatch: 1_000,
                    checkpoints: 3,
                    ..ScoreConfig::default()
                },
                refine: RefineConfig {
                    iterations: 20_000,
                    minibatch: 1_000,
                    lbfgs_iterations: 50,
                    ..RefineConfig::default()
                },
                ..SearchConfig::default()
            },
            pairs: PairConfig {
                steps: 2_000,
                ..PairConfig::default()
            },
            decoder: DecoderConfig::default(),
            ensemble: 10_000,
            sweep_samples: 10_000,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::BENCHMARK_NAMES;

    #[test]
    fn every_benchmark_has_valid_presets() {
        for name in BENCHMARK_NAMES {
            for scale in [Scale::Paper, Scale::Desk] {
                let p = preset(name, scale).unwrap();
                p.search.validate().unwrap();
            }
        }
        assert_eq!(preset("ou", Scale::Paper).unwrap().n_traj, 15_000);
        assert_eq!(preset("ou", Scale::Desk).unwrap().search.iterations, 150);
        assert_eq!(preset("ol2d", Scale::Desk).unwrap().n_traj, 5_000);
        assert!(preset("nope", Scale::Desk).is_err());
        assert!("laptop".parse::<Scale>().is_err());
    }
}
