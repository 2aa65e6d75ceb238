use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pairs::LabeledPairs;
use crate::error::{Error, Result};
use crate::numerics::{Activation, Adam, AdamConfig, DenseNet};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            hidden: 50,
            lr: 1e-2,
            weight_decay: 1e-6,
            iterations: 2_000,
            seed: 0,
        }
    }
}

/// Generator `z -> S(z)` from standard normal draws to noise samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    pub net: DenseNet,
    pub config: DecoderConfig,
    pub final_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct DecoderJson {
    version: u32,
    config: DecoderConfig,
    final_loss: f64,
    network: serde_json::Value,
}

const DECODER_FORMAT_VERSION: u32 = 1;

impl DecoderModel {
    pub fn dim(&self) -> usize {
        self.net.input_size()
    }

    /// Applies the decoder to `n` row-major inputs.
    pub fn decode(&self, z: &[f64], n: usize) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(z, n)?.output().to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DecoderJson {
            version: DECODER_FORMAT_VERSION,
            config: self.config.clone(),
            final_loss: self.final_loss,
            network: serde_json::from_str(&self.net.to_json()?)?,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DecoderJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.version != DECODER_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported decoder version {}",
                doc.version
            )));
        }
        let net = DenseNet::from_json(&doc.network.to_string())?;
        if net.input_size() != net.output_size() {
            return Err(Error::Parse("decoder input and output sizes differ".into()));
        }
        Ok(DecoderModel {
            net,
            config: doc.config,
            final_loss: doc.final_loss,
        })
    }
}

/// Full-batch Adam on the mean squared error `mean_j |S(z_j) - y_j|^2`.
pub fn train_decoder(pairs: &LabeledPairs, cfg: &DecoderConfig) -> Result<DecoderModel> {
    if pairs.is_empty() {
        return Err(Error::config("no pairs to train on"));
    }
    let d = pairs.dim;
    let n = pairs.len();
    let mut rng = stream(cfg.seed, 0);
    let mut net = DenseNet::new(&[d, cfg.hidden, d], Activation::Tanh, &mut rng)?;
    let mut adam = Adam::new(
        AdamConfig::new(cfg.lr).with_weight_decay(cfg.weight_decay),
        net.param_count(),
    );
    let mut upstream = vec![0.0; n * d];
    let mut loss = f64::NAN;
    for it in 0..cfg.iterations {
        let cache = net.forward_batch(&pairs.inputs, n)?;
        let pred = cache.output();
        let mut sum = 0.0;
        for j in 0..n * d {
            let r = pred[j] - pairs.targets[j];
            sum += r * r;
            upstream[j] = 2.0 * r / n as f64;
        }
        loss = sum / n as f64;
        if !loss.is_finite() {
            return Err(Error::numerical(format!(
                "decoder loss became non-finite at iteration {it}"
            )));
        }
        let grad = net.backward_batch(&cache, &upstream)?;
        let mut params = net.params().to_vec();
        adam.step(&mut params, &grad)?;
        net.params_mut().copy_from_slice(&params);
    }
    if cfg.iterations > 0 {
        let pred = net.forward_batch(&pairs.inputs, n)?;
        loss = pred
            .output()
            .iter()
            .zip(&pairs.targets)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / n as f64;
    }
    Ok(DecoderModel {
        net,
        config: cfg.clone(),
        final_loss: loss,
    })
}

/// `n` decoder samples from fresh standard normal inputs, row-major `n x d`.
pub fn sample_noise(model: &DecoderModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    let d = model.dim();
    let mut rng = stream(seed, 0);
    let z: Vec<f64> = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    model.decode(&z, n)
}
