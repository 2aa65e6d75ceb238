use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{OperatorSet, TreeTemplate};

/// Parameter fitting used to score one operator sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub lr: f64,
    pub iterations: usize,
    /// Rows per Adam step; the full set is used when it is smaller.
    pub minibatch: usize,
    /// Full-data loss checks during the Adam phase; the best checkpoint is kept.
    pub checkpoints: usize,
    /// L-BFGS iterations on the full set after Adam (0 disables).
    pub lbfgs_iterations: usize,
    /// Independent initializations; the lowest loss wins.
    pub restarts: usize,
    /// Weight of the complexity term in the scored loss (0 scores the raw loss).
    pub complexity_penalty: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            lr: 8e-3,
            iterations: 10_000,
            minibatch: 5_000,
            checkpoints: 10,
            lbfgs_iterations: 0,
            restarts: 1,
            complexity_penalty: 1.0,
        }
    }
}

/// Fine-tuning of pool members after the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Initial learning rate of the cosine schedule.
    pub lr: f64,
    pub iterations: usize,
    /// Rows per Adam step; 0 means the full set.
    pub minibatch: usize,
    /// L-BFGS iterations on the full set after Adam (0 disables).
    pub lbfgs_iterations: usize,
    /// Refine only the best `top_k` pool members (0 means all).
    pub top_k: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            lr: 5e-3,
            iterations: 80_000,
            minibatch: 0,
            lbfgs_iterations: 0,
            top_k: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Tree shape, see [`TreeTemplate::from_shape`].
    pub template: String,
    pub operators: OperatorSet,
    pub epsilon: f64,
    pub batch_size: usize,
    pub controller_lr: f64,
    pub controller_hidden: usize,
    pub iterations: usize,
    /// Fraction `v` of the batch kept by the risk-seeking threshold.
    pub quantile: f64,
    pub pool_size: usize,
    pub score: ScoreConfig,
    pub refine: RefineConfig,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            template: "u(b(u,u))".into(),
            operators: OperatorSet::default(),
            epsilon: 0.1,
            batch_size: 2,
            controller_lr: 2e-3,
            controller_hidden: 32,
            iterations: 100,
            quantile: 0.5,
            pool_size: 30,
            score: ScoreConfig::default(),
            refine: RefineConfig::default(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        TreeTemplate::from_shape(&self.template)?;
        self.operators.validate()?;
        let checks = [
            (
                (0.0..=1.0).contains(&self.epsilon),
                "epsilon must lie in [0, 1]",
            ),
            (
                self.quantile > 0.0 && self.quantile <= 1.0,
                "quantile must lie in (0, 1]",
            ),
            (self.pool_size >= 1, "pool_size must be at least 1"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.iterations >= 1, "search requires at least 1 iteration"),
            (
                self.controller_hidden >= 1,
                "controller_hidden must be at least 1",
            ),
            (self.controller_lr > 0.0, "controller_lr must be positive"),
            (
                self.score.lr > 0.0 && self.refine.lr >= 0.0,
                "learning rates must be positive",
            ),
            (
                self.score.minibatch >= 1,
                "score minibatch must be at least 1",
            ),
            (
                self.score.restarts >= 1,
                "score restarts must be at least 1",
            ),
            (
                self.score.complexity_penalty >= 0.0,
                "complexity_penalty must be non-negative",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::config(*msg)),
            None => Ok(()),
        }
    }

    pub fn template(&self) -> Result<TreeTemplate> {
        TreeTemplate::from_shape(&self.template)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_degenerate_values_do_not() {
        assert!(SearchConfig::default().validate().is_ok());
        for bad in [
            SearchConfig {
                iterations: 0,
                ..Default::default()
            },
            SearchConfig {
                epsilon: 1.5,
                ..Default::default()
            },
            SearchConfig {
                quantile: 0.0,
                ..Default::default()
            },
            SearchConfig {
                pool_size: 0,
                ..Default::default()
            },
            SearchConfig {
                template: "b(b)".into(),
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
