use std::f64::consts::PI;
use std::sync::Arc;

use super::simulate::InitialCondition;
use super::spec::{NoiseKind, SdeSpec};
use crate::error::{Error, Result};

pub const BENCHMARK_NAMES: [&str; 5] = ["ou", "trig", "double_well", "ol2d", "exp_noise"];

/// A ground-truth SDE with its data-generation and evaluation settings.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub spec: SdeSpec,
    pub init: InitialCondition,
    /// Number of training trajectories.
    pub n_traj: usize,
    pub dt: f64,
    pub n_steps: usize,
    /// Controller iterations of the drift search.
    pub search_iterations: usize,
    pub eval_x0: Vec<Vec<f64>>,
    pub eval_horizon: f64,
    /// Extended domain `[low, high]` (every coordinate) for function sweeps.
    pub sweep_domain: (f64, f64),
    /// Constant noise scale per coordinate, the reference for effective diffusion.
    pub noise_scale: Vec<f64>,
    /// Published fitted drift, one string per output coordinate.
    pub reference_fit: Vec<&'static str>,
}

impl Benchmark {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Training-region bounds per coordinate.
    pub fn training_domain(&self) -> Vec<(f64, f64)> {
        match &self.init {
            InitialCondition::Uniform { low, high } => {
                low.iter().copied().zip(high.iter().copied()).collect()
            }
            InitialCondition::Fixed(x) => x.iter().map(|&v| (v, v)).collect(),
        }
    }
}

/// Looks up one of [`BENCHMARK_NAMES`].
pub fn benchmark(name: &str) -> Result<Benchmark> {
    let uniform = |low: Vec<f64>, high: Vec<f64>| InitialCondition::Uniform { low, high };
    let b = match name {
        "ou" => {
            let (theta, mean) = (1.0, 1.2);
            Benchmark {
                name: "ou",
                spec: SdeSpec::with_diagonal_noise(
                    Arc::new(move |x, out| out[0] = theta * (mean - x[0])),
                    vec![0.3],
                    NoiseKind::Gaussian,
                )?,
                init: uniform(vec![0.0], vec![2.5]),
                n_traj: 15_000,
                dt: 0.01,
                n_steps: 100,
                search_iterations: 90,
                eval_x0: vec![vec![-6.0], vec![1.5], vec![6.0]],
                eval_horizon: 1.0,
                sweep_domain: (-6.0, 6.0),
                noise_scale: vec![0.3],
                reference_fit: vec!["1.1989 - 0.9953*x1"],
            }
        }
        "trig" => Benchmark {
            name: "trig",
            spec: SdeSpec::with_diagonal_noise(
                Arc::new(|x, out| out[0] = (2.0 * PI * x[0]).sin()),
                vec![0.8],
                NoiseKind::Gaussian,
            )?,
            init: uniform(vec![0.0], vec![1.0]),
            n_traj: 10_000,
            dt: 0.01,
            n_steps: 100,
            search_iterations: 120,
            eval_x0: vec![vec![-3.0], vec![0.6], vec![3.0]],
            eval_horizon: 5.0,
            sweep_domain: (-5.0, 5.0),
            noise_scale: vec![0.8],
            reference_fit: vec!["-1.1989*cos(6.2476*x1 - 4.6837) - 0.0104"],
        },
        "double_well" => Benchmark {
            name: "double_well",
            spec: SdeSpec::with_diagonal_noise(
                Arc::new(|x, out| out[0] = x[0] - x[0].powi(3)),
                vec![0.5],
                NoiseKind::Gaussian,
            )?,
            init: uniform(vec![-2.0], vec![2.0]),
            n_traj: 10_000,
            dt: 0.01,
            n_steps: 100,
            search_iterations: 500,
            eval_x0: vec![vec![-5.0], vec![1.5], vec![5.0]],
            eval_horizon: 1.0,
            sweep_domain: (-5.0, 5.0),
            noise_scale: vec![0.5],
            reference_fit: vec!["-0.9922*x1^3 + 0.9709*x1 + 0.0019"],
        },
        "ol2d" => {
            let s = 2f64.sqrt();
            Benchmark {
                name: "ol2d",
                // Gradient of V = 2.5 (x1^2 - 1)^2 + 5 x2^2.
                spec: SdeSpec::with_diagonal_noise(
                    Arc::new(|x, out| {
                        out[0] = -10.0 * x[0] * (x[0] * x[0] - 1.0);
                        out[1] = -10.0 * x[1];
                    }),
                    vec![s, s],
                    NoiseKind::Gaussian,
                )?,
                init: uniform(vec![-1.5, -1.0], vec![1.5, 1.0]),
                n_traj: 35_000,
                dt: 0.01,
                n_steps: 100,
                search_iterations: 200,
                eval_x0: vec![vec![-3.0, -3.0], vec![0.6, 0.6], vec![3.0, 3.0]],
                eval_horizon: 5.0,
                sweep_domain: (-5.0, 5.0),
                noise_scale: vec![s, s],
                reference_fit: vec![
                    "-9.9178*x1^3 + 0.1625*x2^3 + 9.8165*x1 + 0.1204*x2 + 0.03",
                    "-0.0613*x1 - 9.9911*x2 + 0.0011",
                ],
            }
        }
        "exp_noise" => {
            let rate = -2.0;
            Benchmark {
                name: "exp_noise",
                spec: SdeSpec::with_diagonal_noise(
                    Arc::new(move |x, out| out[0] = rate * x[0]),
                    vec![0.1],
                    NoiseKind::Exponential,
                )?,
                init: uniform(vec![0.0], vec![2.5]),
                n_traj: 10_000,
                dt: 0.01,
                n_steps: 100,
                search_iterations: 200,
                eval_x0: vec![vec![-2.0], vec![1.5], vec![5.0]],
                eval_horizon: 1.0,
                sweep_domain: (-5.0, 7.0),
                noise_scale: vec![0.1],
                reference_fit: vec!["-1.9750528*x1"],
            }
        }
        other => {
            return Err(Error::config(format!(
                "unknown benchmark '{other}'; expected one of {}",
                BENCHMARK_NAMES.join(", ")
            )))
        }
    };
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_configurations() {
        let ou = benchmark("ou").unwrap();
        assert_eq!(ou.n_traj, 15_000);
        assert_eq!(ou.spec.drift(&[0.0]), vec![1.2]);
        assert_eq!(ou.spec.diffusion(&[0.0]), vec![0.3]);
        assert_eq!(ou.training_domain(), vec![(0.0, 2.5)]);

        let ol = benchmark("ol2d").unwrap();
        assert_eq!(ol.n_traj, 35_000);
        assert_eq!(ol.dim(), 2);
        assert_eq!(ol.training_domain(), vec![(-1.5, 1.5), (-1.0, 1.0)]);
        assert_eq!(ol.spec.drift(&[2.0, 1.0]), vec![-60.0, -10.0]);
        let sig = ol.spec.diffusion(&[0.0, 0.0]);
        assert_eq!(sig, vec![2f64.sqrt(), 0.0, 0.0, 2f64.sqrt()]);

        let ex = benchmark("exp_noise").unwrap();
        assert_eq!(ex.n_traj, 10_000);
        assert_eq!(ex.spec.noise(), NoiseKind::Exponential);
        assert_eq!(ex.spec.drift(&[1.5]), vec![-3.0]);
        assert_eq!(ex.spec.diffusion(&[1.5]), vec![0.1]);
    }

    #[test]
    fn all_names_resolve_and_evaluate_settings_are_consistent() {
        for name in BENCHMARK_NAMES {
            let b = benchmark(name).unwrap();
            assert!((b.n_steps as f64 * b.dt - 1.0).abs() < 1e-12);
            assert_eq!(b.eval_x0.len(), 3);
            assert!(b.eval_x0.iter().all(|x| x.len() == b.dim()));
            assert_eq!(b.reference_fit.len(), b.dim());
        }
        assert!(matches!(benchmark("lorenz"), Err(Error::Config(_))));
    }
}
