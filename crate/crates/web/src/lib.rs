//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns plain numbers or strings so the page can draw them on
//! a canvas without further decoding. Errors come back as message strings.

use fex_sde::eval::reference_rollout;
use fex_sde::expr::{ExpressionInstance, Operator, OperatorSequence, TreeTemplate};
use fex_sde::noise::{build_pairs, PairConfig, ResidualSet};
use fex_sde::rng::stream;
use fex_sde::sde::benchmark;
use rand_distr::{Distribution, Exp1, StandardNormal};
use wasm_bindgen::prelude::*;

fn msg(e: fex_sde::Error) -> String {
    e.to_string()
}

/// Ensemble of the true system from `x0`, as rows `t, mean_1.., std_1..`
/// flattened into one array.
#[wasm_bindgen]
pub fn simulate_bands(
    name: &str,
    x0: Vec<f64>,
    horizon: f64,
    realizations: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let b = benchmark(name).map_err(msg)?;
    if x0.len() != b.dim() {
        return Err(format!(
            "{name} needs a starting point with {} coordinates",
            b.dim()
        ));
    }
    if !(horizon > 0.0) || realizations == 0 {
        return Err("horizon and realizations must be positive".into());
    }
    let steps = ((horizon / b.dt).round() as usize).max(1);
    let stats = reference_rollout(&b.spec, &x0, b.dt, steps, realizations, seed).map_err(msg)?;
    let t = stats.times();
    let mut out = Vec::with_capacity(stats.len() * (1 + 2 * stats.dim));
    for (s, &ts) in t.iter().enumerate() {
        out.push(ts);
        out.extend_from_slice(stats.mean_at(s));
        out.extend_from_slice(stats.std_at(s));
    }
    Ok(out)
}

fn instance(ops: &str, params: &[f64]) -> Result<ExpressionInstance, String> {
    let template = TreeTemplate::new(3).map_err(msg)?;
    let ops = ops
        .split(',')
        .map(|s| s.trim().parse::<Operator>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(msg)?;
    let seq = OperatorSequence::new(&template, ops).map_err(msg)?;
    ExpressionInstance::new(template, seq, params.to_vec(), 1).map_err(msg)
}

/// Values of a one-input depth-3 expression at `n` evenly spaced points of
/// `[lo, hi]`. `ops` lists the four operators comma separated.
#[wasm_bindgen]
pub fn expression_values(
    ops: &str,
    params: Vec<f64>,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    if n < 2 || !(hi > lo) {
        return Err("need at least two points on an increasing interval".into());
    }
    let e = instance(ops, &params)?;
    Ok((0..n)
        .map(|i| e.value(&[lo + (hi - lo) * i as f64 / (n - 1) as f64]))
        .collect())
}

#[wasm_bindgen]
pub fn expression_text(ops: &str, params: Vec<f64>) -> Result<String, String> {
    Ok(instance(ops, &params)?.pretty_print(4))
}

/// Pushes standard normal draws through the reverse flow toward scaled
/// residuals of the given law, returning interleaved `z, y` pairs.
#[wasm_bindgen]
pub fn noise_pushforward(
    law: &str,
    scale: f64,
    n_residuals: usize,
    n_pairs: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let mut rng = stream(seed, 0);
    let draw: fn(&mut fex_sde::rng::StreamRng) -> f64 = match law {
        "gaussian" => |r| StandardNormal.sample(r),
        "exponential" => |r| Exp1.sample(r),
        other => {
            return Err(format!(
                "unknown law `{other}`; expected gaussian or exponential"
            ))
        }
    };
    let samples = (0..n_residuals).map(|_| scale * draw(&mut rng)).collect();
    let res = ResidualSet::new(1, samples).map_err(msg)?;
    let cfg = PairConfig {
        n_pairs,
        steps,
        minibatch: n_residuals.min(1_000),
        seed: seed.wrapping_add(1),
        ..PairConfig::default()
    };
    let pairs = build_pairs(&res, &cfg).map_err(msg)?;
    Ok(pairs
        .inputs
        .iter()
        .zip(&pairs.targets)
        .flat_map(|(&z, &y)| [z, y])
        .collect())
}
