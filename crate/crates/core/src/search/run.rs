use std::collections::HashMap;
use std::io::Write;

use super::config::{RefineConfig, SearchConfig};
use super::controller::Controller;
use super::pool::CandidatePool;
use super::score::{compute_score, fit_parameters, penalized_loss, Candidate, FitOptions};
use crate::error::{Error, Result};
use crate::expr::{ExpressionInstance, OperatorSequence, TreeTemplate};
use crate::par::map_indices;
use crate::rng::{derive_seed, stream};
use crate::sde::{drift_targets, forcing_center, NoiseKind, RegressionSet, TransitionPairs};

const CONTROLLER_STREAM: u64 = 1;
const SAMPLING_STREAM: u64 = 2;
const REFINE_LABEL: u64 = 0x7265_6669_6e65;

/// One line of the search log.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchLogRow {
    pub iteration: usize,
    pub best_score: f64,
    /// See [`CandidatePool::slot_min_score`].
    pub pool_min_score: f64,
    /// Summed per-slot entropy of the controller after the update.
    pub entropy: f64,
    /// Scores of the sequences sampled this iteration.
    pub batch_scores: Vec<f64>,
}

/// A pool member after fine-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedCandidate {
    pub expression: ExpressionInstance,
    pub loss: f64,
    /// Complexity-penalized loss used for the final choice.
    pub criterion: f64,
    /// Full-data loss before refinement.
    pub initial_loss: f64,
    /// Refinement hit non-finite values; the best finite parameters were kept.
    pub flagged: bool,
}

/// Result of the search for one output coordinate.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub expression: ExpressionInstance,
    pub loss: f64,
    /// Refined pool, ascending penalized loss.
    pub refined: Vec<RefinedCandidate>,
    pub log: Vec<SearchLogRow>,
    /// Distinct sequences scored during the search.
    pub evaluated: usize,
}

/// Re-optimizes every pool member from its stored parameters with a cosine-decayed
/// Adam schedule (and optional L-BFGS). Results are sorted by ascending penalized
/// loss (`kappa` weights the complexity term); a member's loss never rises above
/// its pre-refinement value.
pub fn refine_pool(
    pool: &CandidatePool,
    template: &TreeTemplate,
    data: &RegressionSet,
    cfg: &RefineConfig,
    kappa: f64,
    seed: u64,
) -> Result<Vec<RefinedCandidate>> {
    if pool.is_empty() {
        return Err(Error::config("cannot refine an empty pool"));
    }
    let take = if cfg.top_k == 0 {
        pool.len()
    } else {
        cfg.top_k.min(pool.len())
    };
    let members: Vec<&Candidate> = pool.candidates().take(take).collect();
    let opts = FitOptions {
        lr: cfg.lr,
        iterations: cfg.iterations,
        minibatch: cfg.minibatch,
        cosine: true,
        checkpoints: 10,
        lbfgs_iterations: cfg.lbfgs_iterations,
    };
    let results = map_indices(members.len(), |k| -> Result<RefinedCandidate> {
        let c = members[k];
        let mut expr = ExpressionInstance::new(
            template.clone(),
            c.sequence.clone(),
            c.params.clone(),
            data.dim,
        )?;
        let mut rng = stream(derive_seed(seed, REFINE_LABEL), k as u64);
        let out = fit_parameters(&mut expr, data, &opts, &mut rng);
        let complexity = expr.symbolic().coefficient_count();
        Ok(RefinedCandidate {
            criterion: penalized_loss(out.loss, complexity, data.len(), kappa),
            expression: expr,
            loss: out.loss,
            initial_loss: out.initial_loss,
            flagged: out.diverged,
        })
    });
    let mut refined = results.into_iter().collect::<Result<Vec<_>>>()?;
    refined.sort_by(|a, b| a.criterion.total_cmp(&b.criterion));
    Ok(refined)
}

/// Runs the search loop (sample, score, update the controller, update the pool)
/// for one regression problem, then refines the pool and returns the chosen
/// expression.
pub fn search_dimension(data: &RegressionSet, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::config("regression set is empty"));
    }
    let template = cfg.template()?;
    let mut ctrl_rng = stream(cfg.seed, CONTROLLER_STREAM);
    let mut controller = Controller::new(
        template.clone(),
        cfg.operators.clone(),
        cfg.controller_hidden,
        cfg.controller_lr,
        &mut ctrl_rng,
    )?;
    let mut rng = stream(cfg.seed, SAMPLING_STREAM);
    let mut cache: HashMap<OperatorSequence, Candidate> = HashMap::new();
    let mut pool = CandidatePool::new(cfg.pool_size);
    let mut log = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let batch = controller.sample(cfg.epsilon, cfg.batch_size, &mut rng)?;
        let mut fresh: Vec<OperatorSequence> = Vec::new();
        for s in &batch {
            if !cache.contains_key(&s.sequence) && !fresh.contains(&s.sequence) {
                fresh.push(s.sequence.clone());
            }
        }
        let scored = map_indices(fresh.len(), |k| {
            compute_score(&template, &fresh[k], data, &cfg.score, cfg.seed)
        });
        for c in scored {
            log::debug!(
                "scored {} loss {:.6} score {:.6}",
                c.sequence,
                c.loss,
                c.score
            );
            cache.insert(c.sequence.clone(), c);
        }
        let scores: Vec<f64> = batch.iter().map(|s| cache[&s.sequence].score).collect();
        controller.policy_update(&batch, &scores, cfg.quantile)?;
        for s in &batch {
            pool.insert(cache[&s.sequence].clone());
        }
        log.push(SearchLogRow {
            iteration,
            best_score: pool.best().map_or(0.0, |c| c.score),
            pool_min_score: pool.slot_min_score(),
            entropy: controller.entropy()?,
            batch_scores: scores,
        });
    }

    let refined = refine_pool(
        &pool,
        &template,
        data,
        &cfg.refine,
        cfg.score.complexity_penalty,
        cfg.seed,
    )?;
    let chosen = refined[0].clone();
    Ok(SearchOutcome {
        expression: chosen.expression,
        loss: chosen.loss,
        refined,
        log,
        evaluated: cache.len(),
    })
}

/// Independent search per output coordinate, all with the same seed.
pub fn run_search(data: &[RegressionSet], cfg: &SearchConfig) -> Result<Vec<SearchOutcome>> {
    if data.is_empty() {
        return Err(Error::config("no regression sets given"));
    }
    data.iter().map(|d| search_dimension(d, cfg)).collect()
}

/// Drift fit from transition pairs, one expression per coordinate.
#[derive(Debug, Clone)]
pub struct DriftFit {
    pub outcomes: Vec<SearchOutcome>,
    /// Forcing mean removed from each coordinate's constant term.
    pub centers: Vec<f64>,
}

impl DriftFit {
    pub fn expressions(&self) -> Vec<ExpressionInstance> {
        self.outcomes.iter().map(|o| o.expression.clone()).collect()
    }
}

/// Builds finite-difference targets, runs the search, and for noise laws with a
/// non-zero mean removes the estimated forcing mean from each fitted constant.
pub fn fit_drift(
    pairs: &TransitionPairs,
    noise: NoiseKind,
    cfg: &SearchConfig,
) -> Result<DriftFit> {
    let sets = (0..pairs.dim)
        .map(|i| drift_targets(pairs, i, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let mut outcomes = run_search(&sets, cfg)?;
    let mut centers = vec![0.0; pairs.dim];
    if noise.mean() != 0.0 {
        for (i, (set, outcome)) in sets.iter().zip(outcomes.iter_mut()).enumerate() {
            let resid: Vec<f64> = (0..set.len())
                .map(|j| set.targets[j] - outcome.expression.value(set.input(j)))
                .collect();
            let c = forcing_center(&resid, noise);
            outcome.expression.shift_bias(-c);
            centers[i] = c;
        }
    }
    Ok(DriftFit { outcomes, centers })
}

/// CSV with header `iteration,best_score,pool_min_score,entropy`.
pub fn write_search_log<W: Write>(rows: &[SearchLogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["iteration", "best_score", "pool_min_score", "entropy"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.best_score.to_string(),
            r.pool_min_score.to_string(),
            r.entropy.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
