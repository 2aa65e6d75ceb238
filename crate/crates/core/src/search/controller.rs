use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{Operator, OperatorSequence, OperatorSet, SlotKind, TreeTemplate};
use crate::numerics::{Activation, Adam, AdamConfig, DenseNet};

/// Policy over operator sequences: a ReLU network fed a constant token whose
/// output is split into one logit block per template slot.
#[derive(Debug, Clone)]
pub struct Controller {
    template: TreeTemplate,
    operators: OperatorSet,
    net: DenseNet,
    /// `(offset, len)` of each slot's block in the output.
    blocks: Vec<(usize, usize)>,
    optimizer: Adam,
}

/// A sampled sequence with its per-slot choice indices and log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    pub sequence: OperatorSequence,
    pub choices: Vec<usize>,
    pub log_probs: Vec<f64>,
}

impl SampledSequence {
    pub fn log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }
}

const TOKEN: [f64; 1] = [1.0];

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

impl Controller {
    pub fn new<R: Rng + ?Sized>(
        template: TreeTemplate,
        operators: OperatorSet,
        hidden: usize,
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        operators.validate()?;
        let mut blocks = Vec::with_capacity(template.slot_count());
        let mut off = 0;
        for kind in template.slots() {
            let len = match kind {
                SlotKind::Unary => operators.unary.len(),
                SlotKind::Binary => operators.binary.len(),
            };
            blocks.push((off, len));
            off += len;
        }
        let net = DenseNet::new(&[1, hidden, off], Activation::Relu, rng)?;
        let optimizer = Adam::new(AdamConfig::new(lr), net.param_count());
        Ok(Controller {
            template,
            operators,
            net,
            blocks,
            optimizer,
        })
    }

    pub fn template(&self) -> &TreeTemplate {
        &self.template
    }

    pub fn output_size(&self) -> usize {
        self.net.output_size()
    }

    pub fn network(&self) -> &DenseNet {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    fn operator(&self, slot: usize, choice: usize) -> Operator {
        match self.template.slots()[slot] {
            SlotKind::Unary => Operator::Unary(self.operators.unary[choice]),
            SlotKind::Binary => Operator::Binary(self.operators.binary[choice]),
        }
    }

    /// Index of `op` within its slot's alphabet.
    pub fn choice_of(&self, slot: usize, op: Operator) -> Option<usize> {
        match (self.template.slots()[slot], op) {
            (SlotKind::Unary, Operator::Unary(u)) => {
                self.operators.unary.iter().position(|&x| x == u)
            }
            (SlotKind::Binary, Operator::Binary(b)) => {
                self.operators.binary.iter().position(|&x| x == b)
            }
            _ => None,
        }
    }

    /// Per-slot log-probabilities.
    pub fn log_distributions(&self) -> Result<Vec<Vec<f64>>> {
        let (logits, _) = self.net.forward(&TOKEN)?;
        Ok(self
            .blocks
            .iter()
            .map(|&(o, l)| log_softmax(&logits[o..o + l]))
            .collect())
    }

    pub fn distributions(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .log_distributions()?
            .into_iter()
            .map(|lp| lp.into_iter().map(f64::exp).collect())
            .collect())
    }

    /// Sum of the per-slot Shannon entropies (nats).
    pub fn entropy(&self) -> Result<f64> {
        Ok(self
            .log_distributions()?
            .iter()
            .flat_map(|lp| {
                lp.iter()
                    .map(|l| if l.is_finite() { -l.exp() * l } else { 0.0 })
            })
            .sum())
    }

    /// Epsilon-greedy sampling: every slot independently draws uniformly with
    /// probability `epsilon` and from its softmax block otherwise. The recorded
    /// log-probabilities are always those of the controller's own distribution.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        epsilon: f64,
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<SampledSequence>> {
        let dists = self.log_distributions()?;
        let mut out = Vec::with_capacity(batch);
        for _ in 0..batch {
            let mut choices = Vec::with_capacity(dists.len());
            let mut log_probs = Vec::with_capacity(dists.len());
            let mut ops = Vec::with_capacity(dists.len());
            for (slot, lp) in dists.iter().enumerate() {
                let c = if rng.random::<f64>() < epsilon {
                    rng.random_range(0..lp.len())
                } else {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = lp.len() - 1;
                    for (k, l) in lp.iter().enumerate() {
                        acc += l.exp();
                        if u < acc {
                            pick = k;
                            break;
                        }
                    }
                    pick
                };
                choices.push(c);
                log_probs.push(lp[c]);
                ops.push(self.operator(slot, c));
            }
            out.push(SampledSequence {
                sequence: OperatorSequence::new(&self.template, ops)?,
                choices,
                log_probs,
            });
        }
        Ok(out)
    }

    /// Gradient of `sum_i weights[i] * log p(choices_i)` with respect to the network
    /// parameters.
    pub fn log_prob_gradient(&self, choices: &[Vec<usize>], weights: &[f64]) -> Result<Vec<f64>> {
        if choices.len() != weights.len() {
            return Err(Error::Shape {
                expected: choices.len(),
                actual: weights.len(),
            });
        }
        let (logits, cache) = self.net.forward(&TOKEN)?;
        let mut upstream = vec![0.0; logits.len()];
        for (seq, &w) in choices.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (&(o, l), &c) in self.blocks.iter().zip(seq) {
                let lp = log_softmax(&logits[o..o + l]);
                for k in 0..l {
                    let onehot = if k == c { 1.0 } else { 0.0 };
                    upstream[o + k] += w * (onehot - lp[k].exp());
                }
            }
        }
        self.net.backward(&cache, &upstream)
    }

    /// Risk-seeking REINFORCE step.
    ///
    /// The threshold is the `(1 - v)` empirical quantile of the batch scores (lower
    /// order statistic), and each sequence at or above it contributes
    /// `(score - threshold) * grad log p`. Returns the threshold, or `None` when no
    /// sequence carries weight and the controller is left unchanged.
    pub fn policy_update(
        &mut self,
        batch: &[SampledSequence],
        scores: &[f64],
        quantile: f64,
    ) -> Result<Option<f64>> {
        if batch.is_empty() || batch.len() != scores.len() {
            return Err(Error::config(
                "policy update needs one score per sampled sequence",
            ));
        }
        let threshold = risk_threshold(scores, quantile);
        let weights: Vec<f64> = scores
            .iter()
            .map(|&s| if s >= threshold { s - threshold } else { 0.0 })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            return Ok(None);
        }
        let choices: Vec<Vec<usize>> = batch.iter().map(|b| b.choices.clone()).collect();
        let grad = self.log_prob_gradient(&choices, &weights)?;
        let ascent: Vec<f64> = grad.iter().map(|g| -g / batch.len() as f64).collect();
        self.optimizer.step(self.net.params_mut(), &ascent)?;
        Ok(Some(threshold))
    }
}

/// Lower empirical `(1 - v)` quantile: the order statistic at index
/// `floor((1 - v) * (n - 1))`.
pub fn risk_threshold(scores: &[f64], quantile: f64) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((1.0 - quantile) * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}
