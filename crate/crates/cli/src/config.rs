use std::sync::Arc;

use fex_sde::noise::{DecoderConfig, PairConfig};
use fex_sde::preset::{preset, Scale};
use fex_sde::rng::derive_seed;
use fex_sde::sde::{benchmark, InitialCondition, NoiseKind, SdeSpec, BENCHMARK_NAMES};
use fex_sde::search::SearchConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Full run description. Every section has defaults; a config file only lists
/// what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// One of the built-in systems; omit when `custom` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSde>,
    /// Master seed; each stage adds its own `seed` field as an offset.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_traj: usize,
    pub dt: f64,
    pub n_steps: usize,
    /// Also write the trajectories as CSV.
    pub write_csv: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_traj: 15_000,
            dt: 0.01,
            n_steps: 100,
            write_csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub pairs: PairConfig,
    pub decoder: DecoderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Rollout starting points.
    pub x0: Vec<Vec<f64>>,
    /// Rollout length in time units.
    pub horizon: f64,
    pub ensemble: usize,
    pub sweep_points: usize,
    pub sweep_samples: usize,
    pub density_samples: usize,
    pub density_points: usize,
    pub noise_samples: usize,
    pub svg: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            x0: Vec::new(),
            horizon: 1.0,
            ensemble: 100_000,
            sweep_points: 61,
            sweep_samples: 100_000,
            density_samples: 100_000,
            density_points: 201,
            noise_samples: 100_000,
            svg: true,
            seed: 0,
        }
    }
}

/// A user-defined system with polynomial drift and constant diagonal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSde {
    pub name: String,
    /// One list of terms per coordinate.
    pub drift: Vec<Vec<Term>>,
    pub sigma: Vec<f64>,
    #[serde(default = "gaussian")]
    pub noise: NoiseKind,
    pub init_low: Vec<f64>,
    pub init_high: Vec<f64>,
    /// Range of every coordinate in the function sweeps.
    pub sweep_domain: (f64, f64),
}

fn gaussian() -> NoiseKind {
    NoiseKind::Gaussian
}

/// `coef * prod_k x_k^powers[k]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// The resolved ground-truth system of a run.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub spec: SdeSpec,
    pub init: InitialCondition,
    pub sweep_domain: (f64, f64),
    pub training_domain: Vec<(f64, f64)>,
    pub noise_scale: Vec<f64>,
    pub reference_fit: Vec<String>,
}

impl System {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }
}

pub const SEED_DATA: u64 = 1;
pub const SEED_SEARCH: u64 = 2;
pub const SEED_PAIRS: u64 = 3;
pub const SEED_DECODER: u64 = 4;
pub const SEED_EVAL: u64 = 5;

impl RunConfig {
    /// Defaults for a built-in benchmark at the given scale.
    pub fn for_benchmark(name: &str, scale: Scale) -> Result<Self, CliError> {
        let b = benchmark(name)?;
        let p = preset(name, scale)?;
        Ok(RunConfig {
            benchmark: Some(name.to_string()),
            custom: None,
            seed: 0,
            data: DataConfig {
                n_traj: p.n_traj,
                dt: b.dt,
                n_steps: b.n_steps,
                write_csv: false,
            },
            search: p.search,
            noise: NoiseConfig {
                pairs: p.pairs,
                decoder: p.decoder,
            },
            eval: EvalConfig {
                x0: b.eval_x0,
                horizon: b.eval_horizon,
                ensemble: p.ensemble,
                sweep_samples: p.sweep_samples,
                density_samples: p.ensemble,
                ..EvalConfig::default()
            },
        })
    }

    /// Reads a TOML file layered over the defaults of its benchmark at `scale`
    /// (or over the generic defaults for a custom system).
    pub fn from_toml(
        text: &str,
        scale: Scale,
        benchmark_flag: Option<&str>,
    ) -> Result<Self, CliError> {
        let file: toml::Table =
            toml::from_str(text).map_err(|e| CliError::config(format!("config file: {e}")))?;
        let name = benchmark_flag.map(str::to_string).or_else(|| {
            file.get("benchmark")
                .and_then(|v| v.as_str())
                .map(str::to_string)
        });
        let mut base = match (&name, file.contains_key("custom")) {
            (Some(n), _) => to_table(&RunConfig::for_benchmark(n, scale)?)?,
            (None, true) => to_table(&RunConfig::generic(scale))?,
            (None, false) => {
                return Err(CliError::config(
                    "config names no benchmark and no custom system; set `benchmark` or add a [custom] table",
                ))
            }
        };
        merge(&mut base, file);
        if let Some(n) = name {
            base.insert("benchmark".into(), toml::Value::String(n));
        }
        let cfg: RunConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("config file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn generic(scale: Scale) -> Self {
        let mut cfg = RunConfig::for_benchmark("ou", scale).expect("built-in benchmark");
        cfg.benchmark = None;
        cfg.eval.x0.clear();
        cfg.search.iterations = SearchConfig::default().iterations;
        cfg
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.benchmark, &self.custom) {
            (Some(_), Some(_)) => return Err(CliError::config("set either `benchmark` or [custom], not both")),
            (None, None) => {
                return Err(CliError::config(
                    "config names no benchmark and no custom system; set `benchmark` or add a [custom] table",
                ))
            }
            (Some(b), None) if !BENCHMARK_NAMES.contains(&b.as_str()) => {
                return Err(CliError::config(format!(
                    "benchmark: unknown name `{b}`; valid names are {}",
                    BENCHMARK_NAMES.join(", ")
                )))
            }
            _ => {}
        }
        if self.seed > i64::MAX as u64 {
            return Err(CliError::config("seed: must be below 2^63"));
        }
        let d = &self.data;
        if d.n_traj == 0 || d.n_steps == 0 || !(d.dt > 0.0) {
            return Err(CliError::config(
                "data: n_traj, n_steps and dt must be positive",
            ));
        }
        self.search
            .validate()
            .map_err(|e| CliError::config(format!("search: {e}")))?;
        let p = &self.noise.pairs;
        if p.n_pairs == 0 || p.steps < 3 || p.minibatch == 0 {
            return Err(CliError::config(
                "noise.pairs: n_pairs and minibatch must be positive, steps at least 3",
            ));
        }
        let dec = &self.noise.decoder;
        if dec.hidden == 0 || dec.iterations == 0 || !(dec.lr > 0.0) {
            return Err(CliError::config(
                "noise.decoder: hidden, iterations and lr must be positive",
            ));
        }
        let e = &self.eval;
        if e.ensemble == 0 || e.sweep_points == 0 || e.sweep_samples < 2 || e.noise_samples < 2 {
            return Err(CliError::config(
                "eval: ensemble, sweep_points, sweep_samples and noise_samples must be positive",
            ));
        }
        if e.density_samples < 100 || e.density_points < 2 {
            return Err(CliError::config(
                "eval: density_samples must be at least 100 and density_points at least 2",
            ));
        }
        if !(e.horizon > 0.0) {
            return Err(CliError::config("eval.horizon: must be positive"));
        }
        if e.x0.is_empty() {
            return Err(CliError::config(
                "eval.x0: list at least one starting point",
            ));
        }
        if let Some(c) = &self.custom {
            c.validate()?;
        }
        let dim = self.system()?.dim();
        if let Some(bad) = e.x0.iter().find(|x| x.len() != dim) {
            return Err(CliError::config(format!(
                "eval.x0: point {bad:?} does not have {dim} coordinates"
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match (&self.benchmark, &self.custom) {
            (Some(b), _) => b.clone(),
            (None, Some(c)) => c.name.clone(),
            _ => "run".into(),
        }
    }

    pub fn system(&self) -> Result<System, CliError> {
        if let Some(c) = &self.custom {
            return c.system();
        }
        let name = self.benchmark.as_deref().unwrap_or_default();
        let b = benchmark(name)?;
        Ok(System {
            name: b.name.to_string(),
            training_domain: b.training_domain(),
            spec: b.spec,
            init: b.init,
            sweep_domain: b.sweep_domain,
            noise_scale: b.noise_scale,
            reference_fit: b.reference_fit.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn stage_seed(&self, stage: u64) -> u64 {
        let offset = match stage {
            SEED_DATA => 0,
            SEED_SEARCH => self.search.seed,
            SEED_PAIRS => self.noise.pairs.seed,
            SEED_DECODER => self.noise.decoder.seed,
            _ => self.eval.seed,
        };
        derive_seed(self.seed, stage).wrapping_add(offset)
    }

    /// Hash of the settings the generated data depends on.
    pub fn data_hash(&self) -> String {
        digest(&[
            json(&self.benchmark),
            json(&self.custom),
            json(&self.seed),
            json(&self.data),
        ])
    }

    pub fn fit_hash(&self, drift_only: bool) -> String {
        digest(&[
            self.data_hash(),
            json(&self.search),
            json(&self.noise),
            json(&drift_only),
        ])
    }

    pub fn eval_hash(&self, fit_hash: &str) -> String {
        digest(&[fit_hash.to_string(), json(&self.eval)])
    }

    pub fn config_hash(&self) -> String {
        digest(&[json(self)])
    }
}

impl CustomSde {
    fn validate(&self) -> Result<(), CliError> {
        let d = self.sigma.len();
        let ok = d > 0
            && self.drift.len() == d
            && self.init_low.len() == d
            && self.init_high.len() == d
            && self.drift.iter().flatten().all(|t| t.powers.len() == d);
        if !ok {
            return Err(CliError::config(
                "custom: drift, sigma, init bounds and term powers must all have the system dimension",
            ));
        }
        if !(self.sweep_domain.0 < self.sweep_domain.1) {
            return Err(CliError::config("custom: sweep_domain must be increasing"));
        }
        Ok(())
    }

    fn system(&self) -> Result<System, CliError> {
        self.validate()?;
        let terms = self.drift.clone();
        let drift = Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, coord) in out.iter_mut().zip(&terms) {
                *o = coord
                    .iter()
                    .map(|t| {
                        t.coef
                            * x.iter()
                                .zip(&t.powers)
                                .map(|(v, &p)| v.powi(p as i32))
                                .product::<f64>()
                    })
                    .sum();
            }
        });
        let spec = SdeSpec::with_diagonal_noise(drift, self.sigma.clone(), self.noise)?;
        let init = InitialCondition::Uniform {
            low: self.init_low.clone(),
            high: self.init_high.clone(),
        };
        Ok(System {
            name: self.name.clone(),
            spec,
            training_domain: self
                .init_low
                .iter()
                .copied()
                .zip(self.init_high.iter().copied())
                .collect(),
            init,
            sweep_domain: self.sweep_domain,
            noise_scale: self.sigma.clone(),
            reference_fit: Vec::new(),
        })
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("config sections serialize")
}

fn digest(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn to_table(cfg: &RunConfig) -> Result<toml::Table, CliError> {
    toml::Table::try_from(cfg)
        .map_err(|e| CliError::config(format!("cannot serialize config: {e}")))
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for name in BENCHMARK_NAMES {
            let cfg = RunConfig::for_benchmark(name, Scale::Paper).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(
                RunConfig::from_toml(&text, Scale::Paper, None).unwrap(),
                cfg
            );
        }
    }

    #[test]
    fn file_values_override_the_scale_preset() {
        let cfg = RunConfig::from_toml(
            "benchmark = \"ou\"\n[data]\nn_traj = 300\n[search.score]\niterations = 7\n",
            Scale::Desk,
            None,
        )
        .unwrap();
        assert_eq!(cfg.data.n_traj, 300);
        assert_eq!(cfg.search.score.iterations, 7);
        assert_eq!(cfg.search.iterations, 150);
        assert_eq!(cfg.search.score.minibatch, 1000);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = RunConfig::from_toml(
            "benchmark = \"ou\"\n[data]\nn_trajs = 3\n",
            Scale::Desk,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("n_trajs"), "{err}");
        let err = RunConfig::from_toml("seed = 3\n", Scale::Desk, None).unwrap_err();
        assert!(err.to_string().contains("no benchmark"), "{err}");
        let err = RunConfig::from_toml(
            "benchmark = \"ou\"\n[search]\niterations = 0\n",
            Scale::Desk,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("search"), "{err}");
        let err = RunConfig::from_toml("benchmark = \"ou\"\n[eval]\nx0 = []\n", Scale::Desk, None)
            .unwrap_err();
        assert!(err.to_string().contains("eval.x0"), "{err}");
    }

    #[test]
    fn hashes_track_their_sections() {
        let a = RunConfig::for_benchmark("ou", Scale::Desk).unwrap();
        let mut b = a.clone();
        b.eval.ensemble += 1;
        assert_eq!(a.data_hash(), b.data_hash());
        assert_eq!(a.fit_hash(false), b.fit_hash(false));
        assert_ne!(
            a.eval_hash(&a.fit_hash(false)),
            b.eval_hash(&b.fit_hash(false))
        );
        b.data.n_traj += 1;
        assert_ne!(a.data_hash(), b.data_hash());
        assert_ne!(a.fit_hash(false), a.fit_hash(true));
    }

    #[test]
    fn custom_polynomial_system() {
        let text = r#"
[custom]
name = "linear"
drift = [[{ coef = -2.0, powers = [1] }, { coef = 0.5, powers = [0] }]]
sigma = [0.1]
init_low = [0.0]
init_high = [1.0]
sweep_domain = [-2.0, 2.0]
[eval]
x0 = [[0.5]]
"#;
        let cfg = RunConfig::from_toml(text, Scale::Desk, None).unwrap();
        let sys = cfg.system().unwrap();
        assert_eq!(sys.spec.drift(&[1.0]), vec![-1.5]);
        assert_eq!(cfg.name(), "linear");
    }
}
