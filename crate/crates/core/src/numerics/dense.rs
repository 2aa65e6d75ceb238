use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected network. Hidden layers use `activation`; the output layer is
/// affine. Parameters live in one flat vector, layer by layer, each layer's
/// row-major `out x in` weights followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    generation: u64,
}

/// Activations of a batch, as needed by [`DenseNet::backward_batch`].
#[derive(Debug, Clone)]
pub struct BatchCache {
    n: usize,
    generation: u64,
    /// Per layer (input included), `n x size` row-major.
    acts: Vec<Vec<f64>>,
}

impl BatchCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch_size(&self) -> usize {
        self.n
    }
}

/// Cache for a single input.
pub type ForwardCache = BatchCache;

#[derive(Debug, Serialize, Deserialize)]
struct NetFile {
    version: u32,
    sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

const NET_FORMAT_VERSION: u32 = 1;

impl DenseNet {
    /// Weights and biases drawn from Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = DenseNet::zeros(sizes, activation)?;
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[off..off + fan_out * (fan_in + 1)] {
                *p = rng.random_range(-bound..bound);
            }
            off += fan_out * (fan_in + 1);
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            activation,
            params: vec![0.0; n],
            generation: 0,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let cache = self.forward_batch(x, 1)?;
        Ok((cache.output().to_vec(), cache))
    }

    /// Gradient of `upstream . y` with respect to the parameters.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backward_batch(cache, upstream)
    }

    /// Forward pass over `n` row-major inputs.
    pub fn forward_batch(&self, x: &[f64], n: usize) -> Result<BatchCache> {
        if x.len() != n * self.input_size() {
            return Err(Error::Shape {
                expected: n * self.input_size(),
                actual: x.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + fo * fi];
            let b = &self.params[off + fo * fi..off + fo * (fi + 1)];
            off += fo * (fi + 1);
            let input = &acts[l];
            let hidden = l + 1 < layers;
            let mut out = vec![0.0; n * fo];
            for i in 0..n {
                let xi = &input[i * fi..(i + 1) * fi];
                for o in 0..fo {
                    let row = &w[o * fi..(o + 1) * fi];
                    let z = b[o] + row.iter().zip(xi).map(|(a, c)| a * c).sum::<f64>();
                    out[i * fo + o] = if hidden { self.activation.apply(z) } else { z };
                }
            }
            acts.push(out);
        }
        Ok(BatchCache {
            n,
            generation: self.generation,
            acts,
        })
    }

    /// Gradient of `sum_i upstream_i . y_i` with respect to the parameters.
    pub fn backward_batch(&self, cache: &BatchCache, upstream: &[f64]) -> Result<Vec<f64>> {
        if cache.generation != self.generation || cache.acts.len() != self.sizes.len() {
            return Err(Error::numerical(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        let n = cache.n;
        if upstream.len() != n * self.output_size() {
            return Err(Error::Shape {
                expected: n * self.output_size(),
                actual: upstream.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut g = upstream.to_vec();
        for l in (0..layers).rev() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            {
                let (gw, gb) = grad[off..off + fo * (fi + 1)].split_at_mut(fo * fi);
                for i in 0..n {
                    let xi = &input[i * fi..(i + 1) * fi];
                    for o in 0..fo {
                        let go = g[i * fo + o];
                        if go == 0.0 {
                            continue;
                        }
                        gb[o] += go;
                        let row = &mut gw[o * fi..(o + 1) * fi];
                        for (r, x) in row.iter_mut().zip(xi) {
                            *r += go * x;
                        }
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + fo * fi];
                let mut g_in = vec![0.0; n * fi];
                for i in 0..n {
                    for o in 0..fo {
                        let go = g[i * fo + o];
                        if go == 0.0 {
                            continue;
                        }
                        let row = &w[o * fi..(o + 1) * fi];
                        for (k, wk) in row.iter().enumerate() {
                            g_in[i * fi + k] += go * wk;
                        }
                    }
                }
                for (gv, a) in g_in.iter_mut().zip(input) {
                    *gv *= self.activation.derivative_from_output(*a);
                }
                g = g_in;
            }
        }
        Ok(grad)
    }

    pub fn to_json(&self) -> Result<String> {
        let layers = self.sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            weights.push(self.params[off..off + fo * fi].to_vec());
            biases.push(self.params[off + fo * fi..off + fo * (fi + 1)].to_vec());
            off += fo * (fi + 1);
        }
        let file = NetFile {
            version: NET_FORMAT_VERSION,
            sizes: self.sizes.clone(),
            activation: self.activation,
            weights,
            biases,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.version != NET_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported network format version {}",
                file.version
            )));
        }
        let mut net = DenseNet::zeros(&file.sizes, file.activation)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let layers = file.sizes.len() - 1;
        if file.weights.len() != layers || file.biases.len() != layers {
            return Err(Error::Parse("layer count mismatch".into()));
        }
        let mut params = Vec::with_capacity(net.params.len());
        for l in 0..layers {
            let (fi, fo) = (file.sizes[l], file.sizes[l + 1]);
            if file.weights[l].len() != fo * fi || file.biases[l].len() != fo {
                return Err(Error::Parse(format!("layer {l} has wrong parameter count")));
            }
            params.extend_from_slice(&file.weights[l]);
            params.extend_from_slice(&file.biases[l]);
        }
        net.params = params;
        Ok(net)
    }
}
