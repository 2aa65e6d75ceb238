use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::ExpressionInstance;
use crate::noise::DecoderModel;
use crate::par::map_indices;
use crate::rng::{stream, StreamRng};
use crate::sde::{simulate, InitialCondition, SdeSpec, TrajectorySet};

/// Learned one-step model `x + dt D(x) + S(z)` with `z ~ N(0, I)`.
#[derive(Debug, Clone)]
pub struct LearnedSde {
    drift: Vec<ExpressionInstance>,
    decoder: Option<DecoderModel>,
    dt: f64,
}

impl LearnedSde {
    /// `decoder = None` gives a deterministic model.
    pub fn new(
        drift: Vec<ExpressionInstance>,
        decoder: Option<DecoderModel>,
        dt: f64,
    ) -> Result<Self> {
        let d = drift.len();
        if d == 0 {
            return Err(Error::config(
                "a learned model needs at least one drift expression",
            ));
        }
        if let Some(e) = drift.iter().find(|e| e.dim() != d) {
            return Err(Error::Shape {
                expected: d,
                actual: e.dim(),
            });
        }
        if let Some(dec) = &decoder {
            if dec.dim() != d {
                return Err(Error::Shape {
                    expected: d,
                    actual: dec.dim(),
                });
            }
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(LearnedSde { drift, decoder, dt })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn drift(&self) -> &[ExpressionInstance] {
        &self.drift
    }

    pub fn decoder(&self) -> Option<&DecoderModel> {
        self.decoder.as_ref()
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        self.drift.iter().map(|e| e.value(x)).collect()
    }

    /// Advances `n` row-major states by one step, drawing noise inputs from `rngs[j]`.
    fn step_batch(&self, x: &mut [f64], rngs: &mut [StreamRng]) -> Result<()> {
        let d = self.dim();
        let n = rngs.len();
        let noise = match &self.decoder {
            Some(dec) => {
                let mut z = Vec::with_capacity(n * d);
                for rng in rngs.iter_mut() {
                    z.extend((0..d).map(|_| -> f64 { StandardNormal.sample(rng) }));
                }
                dec.decode(&z, n)?
            }
            None => vec![0.0; n * d],
        };
        for (j, row) in x.chunks_exact_mut(d).enumerate() {
            let mu = self.drift_at(row);
            for k in 0..d {
                row[k] += self.dt * mu[k] + noise[j * d + k];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "learned model produced a non-finite state",
            ));
        }
        Ok(())
    }
}

/// One step of the learned model from `x`.
pub fn predict_step(model: &LearnedSde, x: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::Shape {
            expected: model.dim(),
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("initial state must be finite"));
    }
    let mut next = x.to_vec();
    model.step_batch(&mut next, std::slice::from_mut(rng))?;
    Ok(next)
}

/// Per-time mean and standard deviation over an ensemble of realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub dim: usize,
    pub dt: f64,
    /// `(steps + 1) x dim`, row-major.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub realizations: usize,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.mean.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|s| s as f64 * self.dt).collect()
    }

    pub fn mean_at(&self, s: usize) -> &[f64] {
        &self.mean[s * self.dim..(s + 1) * self.dim]
    }

    pub fn std_at(&self, s: usize) -> &[f64] {
        &self.std[s * self.dim..(s + 1) * self.dim]
    }

    /// Columns `t, mean_1.., std_1..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("mean_{k}")));
        header.extend((1..=self.dim).map(|k| format!("std_{k}")));
        w.write_record(&header).map_err(csv_error)?;
        for (s, t) in self.times().into_iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.mean_at(s).iter().map(f64::to_string));
            row.extend(self.std_at(s).iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Running sums of `x` and `x^2` per time and dimension.
struct Moments {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            sum: vec![0.0; len],
            sq: vec![0.0; len],
        }
    }

    fn add_state(&mut self, s: usize, d: usize, x: &[f64]) {
        for row in x.chunks_exact(d) {
            for k in 0..d {
                self.sum[s * d + k] += row[k];
                self.sq[s * d + k] += row[k] * row[k];
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += b;
        }
    }

    fn finish(self, dim: usize, dt: f64, n: usize) -> EnsembleStats {
        let nf = n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / nf).collect();
        let std = self
            .sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                if n < 2 {
                    0.0
                } else {
                    ((q - nf * m * m) / (nf - 1.0)).max(0.0).sqrt()
                }
            })
            .collect();
        EnsembleStats {
            dim,
            dt,
            mean,
            std,
            realizations: n,
        }
    }
}

const CHUNK: usize = 1024;

/// Simulates `n_real` realizations of the learned model from `x0` for `steps`
/// steps. Realization `j` draws from random stream `j`.
pub fn rollout(
    model: &LearnedSde,
    x0: &[f64],
    steps: usize,
    n_real: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    if steps == 0 || n_real == 0 {
        return Err(Error::config(
            "rollouts need at least one step and one realization",
        ));
    }
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Shape {
            expected: d,
            actual: x0.len(),
        });
    }
    let n_chunks = n_real.div_ceil(CHUNK);
    let parts = map_indices(n_chunks, |c| -> Result<Moments> {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n_real);
        let mut rngs: Vec<StreamRng> = (lo..hi).map(|j| stream(seed, j as u64)).collect();
        let mut x: Vec<f64> = x0.iter().copied().cycle().take((hi - lo) * d).collect();
        let mut m = Moments::new((steps + 1) * d);
        m.add_state(0, d, &x);
        for s in 1..=steps {
            model.step_batch(&mut x, &mut rngs)?;
            m.add_state(s, d, &x);
        }
        Ok(m)
    });
    let mut total = Moments::new((steps + 1) * d);
    for p in parts {
        total.merge(&p?);
    }
    Ok(total.finish(d, model.dt, n_real))
}

/// Final states, row-major, of the same realizations [`rollout`] simulates.
pub fn rollout_endpoints(
    model: &LearnedSde,
    x0: &[f64],
    steps: usize,
    n_real: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_real == 0 {
        return Err(Error::config("rollouts need at least one realization"));
    }
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Shape {
            expected: d,
            actual: x0.len(),
        });
    }
    let parts = map_indices(n_real.div_ceil(CHUNK), |c| -> Result<Vec<f64>> {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n_real);
        let mut rngs: Vec<StreamRng> = (lo..hi).map(|j| stream(seed, j as u64)).collect();
        let mut x: Vec<f64> = x0.iter().copied().cycle().take((hi - lo) * d).collect();
        for _ in 0..steps {
            model.step_batch(&mut x, &mut rngs)?;
        }
        Ok(x)
    });
    let mut out = Vec::with_capacity(n_real * d);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// `m` one-step samples of the learned model from `x`, row-major.
pub fn one_step_samples(model: &LearnedSde, x: &[f64], m: usize, seed: u64) -> Result<Vec<f64>> {
    rollout_endpoints(model, x, 1, m, seed)
}

/// Ensemble statistics of recorded trajectories.
pub fn trajectory_stats(traj: &TrajectorySet) -> EnsembleStats {
    let d = traj.dim;
    let mut m = Moments::new((traj.n_steps + 1) * d);
    for j in 0..traj.n_traj() {
        for s in 0..=traj.n_steps {
            m.add_state(s, d, traj.state(j, s));
        }
    }
    m.finish(d, traj.dt, traj.n_traj())
}

/// Ground-truth ensemble from the true SDE, integrated at a tenfold finer step
/// and recorded every `dt`.
pub fn reference_rollout(
    spec: &SdeSpec,
    x0: &[f64],
    dt: f64,
    steps: usize,
    n_real: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    let traj = simulate(
        spec,
        &InitialCondition::Fixed(x0.to_vec()),
        dt,
        steps,
        n_real,
        seed,
        10,
    )?;
    Ok(trajectory_stats(&traj))
}

/// Effective drift and diffusion at one state, with the standard error of the drift.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoefficients {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub drift_se: Vec<f64>,
}

/// `mean((x' - x) / dt)` and `std(x') / sqrt(dt)` over `m` one-step samples.
pub fn effective_coefficients(
    model: &LearnedSde,
    x: &[f64],
    m: usize,
    seed: u64,
) -> Result<EffectiveCoefficients> {
    if m < 2 {
        return Err(Error::config(
            "effective coefficients need at least two samples",
        ));
    }
    let d = model.dim();
    let samples = one_step_samples(model, x, m, seed)?;
    let mean = crate::stats::mean(&samples, d);
    let std = crate::stats::std(&samples, d);
    let dt = model.dt;
    Ok(EffectiveCoefficients {
        drift: (0..d).map(|k| (mean[k] - x[k]) / dt).collect(),
        diffusion: std.iter().map(|s| s / dt.sqrt()).collect(),
        drift_se: std.iter().map(|s| s / dt / (m as f64).sqrt()).collect(),
    })
}

pub fn effective_drift(model: &LearnedSde, x: &[f64], m: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(effective_coefficients(model, x, m, seed)?.drift)
}

pub fn effective_diffusion(model: &LearnedSde, x: &[f64], m: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(effective_coefficients(model, x, m, seed)?.diffusion)
}
