use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};

/// `exp(x)` for `x <= 0`, branch-free so weight loops vectorize. Relative error is
/// below `1e-12`; results under `exp(-700)` flush toward zero.
#[inline(always)]
fn exp_nonpositive(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let x = x.max(-700.0);
    let big = x * std::f64::consts::LOG2_E + SHIFT;
    let k = big - SHIFT;
    let r = (x * std::f64::consts::LOG2_E - k) * std::f64::consts::LN_2;
    let mut p = 1.0 / 3_628_800.0;
    for c in [
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let scale = f64::from_bits(big.to_bits().wrapping_add(1023) << 52);
    p * scale
}

/// Monte Carlo score of the noised empirical distribution at `(z, tau)`:
/// `V = sum_j w_j (alpha r_j - z) / beta^2` with
/// `w = softmax_j(-|z - alpha r_j|^2 / (2 beta^2))`.
///
/// `residuals` is a row-major `n x d` minibatch with `d = z.len()`.
pub fn mc_score(
    z: &[f64],
    tau: f64,
    residuals: &[f64],
    schedule: &DiffusionSchedule,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; z.len()];
    let mut scratch = Vec::new();
    mc_score_into(z, tau, residuals, schedule, &mut scratch, &mut out)?;
    Ok(out)
}

pub(crate) fn mc_score_into(
    z: &[f64],
    tau: f64,
    residuals: &[f64],
    schedule: &DiffusionSchedule,
    logits: &mut Vec<f64>,
    out: &mut [f64],
) -> Result<()> {
    schedule.check(tau)?;
    let d = z.len();
    if d == 0 || residuals.is_empty() || residuals.len() % d != 0 {
        return Err(Error::config(
            "score minibatch must be a non-empty n x d array",
        ));
    }
    let alpha = schedule.alpha(tau);
    let beta2 = schedule.beta2(tau);
    let inv = -0.5 / beta2;
    logits.clear();
    if d == 1 {
        let z0 = z[0];
        logits.extend(residuals.iter().map(|r| {
            let diff = z0 - alpha * r;
            diff * diff * inv
        }));
    } else {
        logits.extend(residuals.chunks_exact(d).map(|r| {
            let mut dist = 0.0;
            for k in 0..d {
                let diff = z[k] - alpha * r[k];
                dist += diff * diff;
            }
            dist * inv
        }));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for l in logits.iter_mut() {
        *l = exp_nonpositive(*l - max);
    }
    let total: f64 = logits.iter().sum();
    // sum_j w_j alpha r_j / total - z, scaled by 1 / beta^2
    out.fill(0.0);
    if d == 1 {
        out[0] = logits.iter().zip(residuals).map(|(w, r)| w * r).sum();
    } else {
        for (w, r) in logits.iter().zip(residuals.chunks_exact(d)) {
            for k in 0..d {
                out[k] += w * r[k];
            }
        }
    }
    for k in 0..d {
        out[k] = (alpha * out[k] / total - z[k]) / beta2;
    }
    Ok(())
}

/// Integrates the probability-flow ODE `dZ = [b(tau) Z - sigma^2(tau) V(Z, tau) / 2] dtau`
/// backward from `tau = 1 - delta` to `tau = delta` with `steps` explicit Euler
/// steps, returning the final state.
pub fn reverse_ode_solve<F>(
    z1: &[f64],
    schedule: &DiffusionSchedule,
    steps: usize,
    mut score: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64, &mut [f64]) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::config("reverse solve needs at least one step"));
    }
    let (start, end) = (1.0 - schedule.delta, schedule.delta);
    let h = (start - end) / steps as f64;
    let mut z = z1.to_vec();
    let mut v = vec![0.0; z.len()];
    for k in 0..steps {
        let tau = start - k as f64 * h;
        score(&z, tau, &mut v)?;
        let b = schedule.drift_coef(tau);
        let s2 = schedule.diffusion2(tau);
        for i in 0..z.len() {
            z[i] -= h * (b * z[i] - 0.5 * s2 * v[i]);
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical(format!(
                "reverse solve diverged at tau = {tau}"
            )));
        }
    }
    Ok(z)
}

/// Continues a reverse solve below the clamp level `delta` with `steps`
/// exponential-integrator steps on a halving grid, ending at `delta / 2^steps`.
///
/// Each step splits the state into its posterior mean and the implied noise and
/// rescales the noise to the next level, which is exact for a point mass.
pub fn reverse_tail<F>(
    z: &[f64],
    schedule: &DiffusionSchedule,
    steps: usize,
    mut score: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64, &mut [f64]) -> Result<()>,
{
    let mut z = z.to_vec();
    let mut v = vec![0.0; z.len()];
    let mut tau = schedule.delta;
    for _ in 0..steps {
        score(&z, tau, &mut v)?;
        let next = 0.5 * tau;
        let (alpha, beta2) = (schedule.alpha(tau), schedule.beta2(tau));
        let (alpha_n, ratio) = (1.0 - next, (next / tau).sqrt());
        for i in 0..z.len() {
            let mean = (z[i] + beta2 * v[i]) / alpha;
            z[i] = alpha_n * mean + ratio * (z[i] - alpha * mean);
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical(format!(
                "reverse tail diverged at tau = {tau}"
            )));
        }
        tau = next;
    }
    Ok(z)
}
