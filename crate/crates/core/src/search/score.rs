use rand::Rng;

use super::config::ScoreConfig;
use crate::expr::{BatchWorkspace, ExpressionInstance, OperatorSequence, TreeTemplate};
use crate::numerics::{lbfgs_refine, Adam, AdamConfig, CosineSchedule, LbfgsConfig};
use crate::rng::{derive_seed, hash_bytes, stream, StreamRng};
use crate::sde::RegressionSet;

/// An operator sequence with the parameters and loss found when it was scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub sequence: OperatorSequence,
    /// `1 / (1 + sqrt(criterion))`, zero when fitting failed.
    pub score: f64,
    /// Mean squared error over the full regression set.
    pub loss: f64,
    /// Complexity-penalized loss, see [`penalized_loss`].
    pub criterion: f64,
    /// Free coefficients of the simplified expression.
    pub complexity: usize,
    pub params: Vec<f64>,
}

pub fn score_from_loss(loss: f64) -> f64 {
    if loss.is_finite() && loss >= 0.0 {
        1.0 / (1.0 + loss.sqrt())
    } else {
        0.0
    }
}

/// `loss * (1 + kappa * complexity * ln(n) / n)`: a BIC-style inflation that lets
/// a simpler expression beat one whose extra freedom only fits noise. `kappa = 0`
/// returns the raw loss.
pub fn penalized_loss(loss: f64, complexity: usize, n: usize, kappa: f64) -> f64 {
    if kappa == 0.0 || n < 2 {
        return loss;
    }
    let n = n as f64;
    loss * (1.0 + kappa * complexity as f64 * n.ln() / n)
}

/// Settings for one gradient-based parameter fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub lr: f64,
    pub iterations: usize,
    /// Rows per step; the full set when 0 or at least the set size.
    pub minibatch: usize,
    /// Decay the learning rate to zero with a cosine schedule.
    pub cosine: bool,
    /// Full-data loss checks during Adam (the end of the run is always checked).
    pub checkpoints: usize,
    pub lbfgs_iterations: usize,
}

/// Result of [`fit_parameters`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOutcome {
    /// Full-data loss before fitting.
    pub initial_loss: f64,
    /// Full-data loss at the kept parameters (never above `initial_loss`).
    pub loss: f64,
    /// Some Adam steps produced non-finite values.
    pub diverged: bool,
}

/// Fits `instance` to `data` with Adam on random minibatches, optionally followed
/// by L-BFGS on the full set. The parameters with the lowest full-data loss seen
/// at any checkpoint are kept, so the loss never increases.
pub fn fit_parameters(
    instance: &mut ExpressionInstance,
    data: &RegressionSet,
    opts: &FitOptions,
    rng: &mut StreamRng,
) -> FitOutcome {
    let n = data.len();
    let mut full = BatchWorkspace::new();
    full.load(&data.inputs, &data.targets);
    let initial_loss = instance.batch_loss(&mut full);
    let mut best_loss = initial_loss;
    let mut best = instance.params().to_vec();
    let mut diverged = false;

    let use_minibatch = opts.minibatch > 0 && opts.minibatch < n;
    let mut batch = BatchWorkspace::new();
    if !use_minibatch {
        batch.load(&data.inputs, &data.targets);
    }
    let mut indices = vec![0usize; if use_minibatch { opts.minibatch } else { 0 }];
    let mut params = instance.params().to_vec();
    let mut grad = Vec::new();
    let mut adam = Adam::new(AdamConfig::new(opts.lr), params.len());
    let schedule = CosineSchedule::new(opts.lr, opts.iterations as u64);
    let every = if opts.checkpoints > 0 {
        (opts.iterations / opts.checkpoints).max(1)
    } else {
        usize::MAX
    };

    for step in 0..opts.iterations {
        if use_minibatch {
            for i in indices.iter_mut() {
                *i = rng.random_range(0..n);
            }
            batch.gather(&data.inputs, &data.targets, data.dim, &indices);
        }
        let loss = instance.batch_loss_and_grad(&mut batch, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            diverged = true;
            params.copy_from_slice(&best);
            instance.set_params(&params).expect("same length");
            adam = Adam::new(AdamConfig::new(opts.lr), params.len());
            continue;
        }
        let lr = if opts.cosine {
            schedule.lr(step as u64)
        } else {
            opts.lr
        };
        adam.step_with_lr(&mut params, &grad, lr)
            .expect("matching lengths");
        instance.set_params(&params).expect("same length");
        let last = step + 1 == opts.iterations;
        if last || (step + 1) % every == 0 {
            let full_loss = instance.batch_loss(&mut full);
            if full_loss < best_loss || !best_loss.is_finite() && full_loss.is_finite() {
                best_loss = full_loss;
                best.copy_from_slice(&params);
            }
        }
    }
    instance.set_params(&best).expect("same length");

    if opts.lbfgs_iterations > 0 && best_loss.is_finite() {
        let mut probe = instance.clone();
        let cfg = LbfgsConfig {
            max_iters: opts.lbfgs_iterations,
            ..LbfgsConfig::default()
        };
        let outcome = lbfgs_refine(
            |p, g| {
                probe.set_params(p).expect("same length");
                let mut gv = Vec::new();
                let loss = probe.batch_loss_and_grad(&mut full, &mut gv);
                g.copy_from_slice(&gv);
                loss
            },
            &best,
            &cfg,
        );
        if outcome.value < best_loss {
            best_loss = outcome.value;
            instance.set_params(&outcome.params).expect("same length");
        }
    }
    FitOutcome {
        initial_loss,
        loss: best_loss,
        diverged,
    }
}

/// Per-sequence random stream, so the score of a sequence depends only on the run
/// seed and the sequence itself.
pub fn sequence_seed(seed: u64, sequence: &OperatorSequence) -> u64 {
    derive_seed(seed, hash_bytes(sequence.to_string().as_bytes()))
}

/// Scores `sequence` by fitting its parameters to `data` and mapping the best
/// full-data loss, after the complexity penalty, through `1 / (1 + sqrt(L))`.
pub fn compute_score(
    template: &TreeTemplate,
    sequence: &OperatorSequence,
    data: &RegressionSet,
    cfg: &ScoreConfig,
    seed: u64,
) -> Candidate {
    let base = sequence_seed(seed, sequence);
    let opts = FitOptions {
        lr: cfg.lr,
        iterations: cfg.iterations,
        minibatch: cfg.minibatch,
        cosine: false,
        checkpoints: cfg.checkpoints,
        lbfgs_iterations: cfg.lbfgs_iterations,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = stream(base, restart as u64);
        let Ok(mut inst) =
            ExpressionInstance::initialized(template.clone(), sequence.clone(), data.dim, &mut rng)
        else {
            continue;
        };
        let outcome = fit_parameters(&mut inst, data, &opts, &mut rng);
        let better = match &best {
            None => true,
            Some((l, _)) => outcome.loss < *l || !l.is_finite() && outcome.loss.is_finite(),
        };
        if better {
            best = Some((outcome.loss, inst.params().to_vec()));
        }
    }
    let (loss, params) = best.unwrap_or((f64::INFINITY, vec![0.0; template.param_count(data.dim)]));
    let complexity =
        ExpressionInstance::new(template.clone(), sequence.clone(), params.clone(), data.dim)
            .map_or(0, |e| e.symbolic().coefficient_count());
    let criterion = penalized_loss(loss, complexity, data.len(), cfg.complexity_penalty);
    Candidate {
        sequence: sequence.clone(),
        score: score_from_loss(criterion),
        loss,
        criterion,
        complexity,
        params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{BinaryOp, Operator, UnaryOp};

    fn seq(ops: [Operator; 4]) -> OperatorSequence {
        OperatorSequence::new(&TreeTemplate::new(3).unwrap(), ops.to_vec()).unwrap()
    }

    fn affine_seq() -> OperatorSequence {
        seq([
            Operator::Unary(UnaryOp::Id),
            Operator::Unary(UnaryOp::Zero),
            Operator::Unary(UnaryOp::Id),
            Operator::Binary(BinaryOp::Add),
        ])
    }

    #[test]
    fn score_bounds() {
        assert_eq!(score_from_loss(0.0), 1.0);
        assert_eq!(score_from_loss(f64::INFINITY), 0.0);
        assert_eq!(score_from_loss(f64::NAN), 0.0);
        assert!((score_from_loss(4.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(penalized_loss(2.0, 5, 1000, 0.0), 2.0);
        assert_eq!(penalized_loss(0.0, 5, 1000, 1.0), 0.0);
        assert!(penalized_loss(2.0, 3, 1000, 1.0) < penalized_loss(2.0, 4, 1000, 1.0));
    }

    #[test]
    fn zero_expression_on_zero_targets_scores_one() {
        let template = TreeTemplate::new(3).unwrap();
        let zero = seq([
            Operator::Unary(UnaryOp::Zero),
            Operator::Unary(UnaryOp::Zero),
            Operator::Unary(UnaryOp::Zero),
            Operator::Binary(BinaryOp::Mul),
        ]);
        let data = RegressionSet::new(1, vec![0.1, 0.5, 0.9], vec![0.0; 3]).unwrap();
        let cfg = ScoreConfig {
            iterations: 3000,
            ..ScoreConfig::default()
        };
        let c = compute_score(&template, &zero, &data, &cfg, 0);
        assert!(c.loss < 1e-12, "loss {}", c.loss);
        assert!(c.score > 0.999_99);
    }

    #[test]
    fn noiseless_affine_data_is_fit_exactly() {
        let template = TreeTemplate::new(3).unwrap();
        let xs: Vec<f64> = (0..400).map(|i| i as f64 / 160.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.2 - x).collect();
        let data = RegressionSet::new(1, xs, ys).unwrap();
        let cfg = ScoreConfig {
            iterations: 2000,
            lbfgs_iterations: 100,
            ..ScoreConfig::default()
        };
        let c = compute_score(&template, &affine_seq(), &data, &cfg, 1);
        assert!(c.loss < 1e-6, "loss {}", c.loss);
        assert!(c.score > 0.999);
    }

    #[test]
    fn scores_are_reproducible_per_sequence() {
        let template = TreeTemplate::new(3).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 40.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let data = RegressionSet::new(1, xs, ys).unwrap();
        let cfg = ScoreConfig {
            iterations: 200,
            minibatch: 32,
            ..ScoreConfig::default()
        };
        let a = compute_score(&template, &affine_seq(), &data, &cfg, 7);
        let b = compute_score(&template, &affine_seq(), &data, &cfg, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn fitting_never_increases_the_full_loss() {
        let template = TreeTemplate::new(3).unwrap();
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 80.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).exp()).collect();
        let data = RegressionSet::new(1, xs, ys).unwrap();
        let mut rng = stream(3, 0);
        let mut inst =
            ExpressionInstance::initialized(template, affine_seq(), 1, &mut rng).unwrap();
        let opts = FitOptions {
            lr: 10.0,
            iterations: 50,
            minibatch: 16,
            cosine: false,
            checkpoints: 5,
            lbfgs_iterations: 0,
        };
        let out = fit_parameters(&mut inst, &data, &opts, &mut rng);
        assert!(out.loss <= out.initial_loss);
    }
}
