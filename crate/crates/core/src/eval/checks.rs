use serde::Serialize;

use crate::expr::{Atom, ExpressionInstance, Polynomial, Symbolic, UnaryOp};

/// Outcome of one pass/fail criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(id: &str, passed: bool, detail: String) -> Self {
        Check {
            id: id.to_string(),
            passed,
            detail,
        }
    }
}

/// Coefficients below this magnitude count as absent when deciding the form of
/// an expression.
pub const NEGLIGIBLE_COEFFICIENT: f64 = 1e-3;

fn inside(v: f64, lo: f64, hi: f64) -> bool {
    lo <= v && v <= hi
}

/// Coefficient of `x_k^p` in a polynomial.
fn coef(poly: &Polynomial, k: usize, p: u32) -> f64 {
    let mut e = vec![0; poly.nvars()];
    e[k] = p;
    poly.coefficient(&e)
}

/// Largest magnitude among terms not listed in `keep`.
fn largest_other(poly: &Polynomial, keep: &[Vec<u32>]) -> f64 {
    poly.terms()
        .filter(|(e, _)| !keep.iter().any(|k| k.as_slice() == *e))
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max)
}

/// `(slope, intercept)` of a univariate expression that is affine up to
/// negligible higher-order terms.
pub fn affine_form(sym: &Symbolic) -> Option<(f64, f64)> {
    let poly = sym.as_polynomial()?;
    if poly.nvars() != 1 || largest_other(poly, &[vec![0], vec![1]]) >= NEGLIGIBLE_COEFFICIENT {
        return None;
    }
    Some((coef(poly, 0, 1), coef(poly, 0, 0)))
}

/// `(|frequency|, |amplitude|)` of the largest sine or cosine term whose argument
/// is affine in the single input.
pub fn dominant_wave(sym: &Symbolic) -> Option<(f64, f64)> {
    sym.atoms()
        .iter()
        .filter_map(|(c, atom)| match atom {
            Atom::Apply(UnaryOp::Sin | UnaryOp::Cos, inner) => {
                affine_form(inner).map(|(beta, _)| (beta.abs(), c.abs()))
            }
            _ => None,
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

fn describe(exprs: &[ExpressionInstance]) -> String {
    exprs
        .iter()
        .map(|e| e.pretty_print(4))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks a recovered drift against the coefficient windows for a named
/// benchmark. Unknown names give `None`.
pub fn drift_check(benchmark: &str, exprs: &[ExpressionInstance]) -> Option<Check> {
    let syms: Vec<Symbolic> = exprs.iter().map(|e| e.symbolic()).collect();
    let text = describe(exprs);
    let check = match benchmark {
        "ou" => {
            let ok = syms.len() == 1
                && affine_form(&syms[0])
                    .is_some_and(|(a, b)| inside(a, -1.05, -0.95) && inside(b, 1.15, 1.25));
            Check::new("ou_affine_drift", ok, text)
        }
        "double_well" => {
            let ok = syms.len() == 1
                && syms[0].as_polynomial().is_some_and(|p| {
                    p.nvars() == 1
                        && inside(coef(p, 0, 3), -1.1, -0.9)
                        && inside(coef(p, 0, 1), 0.85, 1.1)
                        && coef(p, 0, 0).abs() < 0.05
                });
            Check::new("double_well_cubic_drift", ok, text)
        }
        "trig" => {
            let ok = syms.len() == 1
                && dominant_wave(&syms[0])
                    .is_some_and(|(f, a)| inside(f, 6.0, 6.55) && inside(a, 0.85, 1.25));
            Check::new("trig_wave_drift", ok, text)
        }
        "exp_noise" => {
            let ok = syms.len() == 1
                && syms[0]
                    .as_polynomial()
                    .is_some_and(|p| p.nvars() == 1 && inside(coef(p, 0, 1), -2.1, -1.9));
            Check::new("exp_noise_linear_drift", ok, text)
        }
        "ol2d" => {
            let ok = syms.len() == 2
                && match (syms[0].as_polynomial(), syms[1].as_polynomial()) {
                    (Some(p1), Some(p2)) => {
                        p1.nvars() == 2
                            && inside(coef(p1, 0, 3), -10.5, -9.4)
                            && inside(coef(p1, 0, 1), 9.4, 10.5)
                            && largest_other(p1, &[vec![3, 0], vec![1, 0]]) < 0.5
                            && inside(coef(p2, 1, 1), -10.3, -9.7)
                            && largest_other(p2, &[vec![0, 1]]) < 0.5
                    }
                    _ => false,
                };
            Check::new("ol2d_polynomial_drift", ok, text)
        }
        _ => return None,
    };
    Some(check)
}

/// Sample moment checks for decoder output of a named benchmark.
pub fn noise_checks(benchmark: &str, samples: &[f64], dim: usize) -> Vec<Check> {
    let mean = crate::stats::mean(samples, dim);
    let std = crate::stats::std(samples, dim);
    let skew = crate::stats::skewness(samples, dim);
    let within = |v: f64, target: f64, rel: f64| (v - target).abs() <= rel * target;
    match benchmark {
        "ou" => vec![Check::new(
            "ou_noise_moments",
            mean[0].abs() < 0.005 && within(std[0], 0.03, 0.10),
            format!("mean {:.5} std {:.5}", mean[0], std[0]),
        )],
        "exp_noise" => vec![Check::new(
            "exp_noise_shape",
            inside(skew[0], 1.2, 2.8) && within(std[0], 0.01, 0.15),
            format!("skewness {:.3} std {:.5}", skew[0], std[0]),
        )],
        _ => Vec::new(),
    }
}

/// Checks an effective-drift sweep against `bound(x) + 3 se(x)` and requires the
/// effective diffusion to stay within 10% of its average.
pub fn sweep_check(
    id: &str,
    xs: &[f64],
    drift_error: &[f64],
    drift_se: &[f64],
    diffusion: &[f64],
    bound: impl Fn(f64) -> f64,
) -> Check {
    let worst = xs
        .iter()
        .zip(drift_error)
        .zip(drift_se)
        .map(|((&x, e), se)| e.abs() - bound(x) - 3.0 * se)
        .fold(f64::NEG_INFINITY, f64::max);
    let avg = diffusion.iter().sum::<f64>() / diffusion.len().max(1) as f64;
    let spread = diffusion
        .iter()
        .map(|s| (s - avg).abs() / avg)
        .fold(0.0, f64::max);
    Check::new(
        id,
        worst <= 0.0 && spread <= 0.10,
        format!(
            "worst excess {worst:.4}, diffusion spread {:.1}%",
            100.0 * spread
        ),
    )
}

/// Polynomial coefficients of the true drift of the affine and cubic benchmarks,
/// as `(power, coefficient)`.
fn true_coefficients(benchmark: &str) -> Option<&'static [(u32, f64)]> {
    match benchmark {
        "ou" => Some(&[(0, 1.2), (1, -1.0)]),
        "double_well" => Some(&[(1, 1.0), (3, -1.0)]),
        _ => None,
    }
}

/// `|c_hat_p - c_p|` for every power present in either the recovered or the true
/// drift of a univariate polynomial benchmark. `None` for other benchmarks or
/// non-polynomial expressions.
pub fn coefficient_errors(benchmark: &str, expr: &ExpressionInstance) -> Option<Vec<(u32, f64)>> {
    let truth = true_coefficients(benchmark)?;
    let sym = expr.symbolic();
    let poly = sym.as_polynomial()?;
    if poly.nvars() != 1 {
        return None;
    }
    let mut powers: Vec<u32> = poly
        .terms()
        .map(|(e, _)| e[0])
        .chain(truth.iter().map(|t| t.0))
        .collect();
    powers.sort_unstable();
    powers.dedup();
    Some(
        powers
            .into_iter()
            .map(|p| {
                let c = truth.iter().find(|t| t.0 == p).map_or(0.0, |t| t.1);
                (p, (coef(poly, 0, p) - c).abs())
            })
            .collect(),
    )
}

/// `sum_p |c_hat_p - c_p| |x|^p`, the drift error at `x` implied by the
/// coefficient errors.
pub fn coefficient_bound(errors: &[(u32, f64)], x: f64) -> f64 {
    errors
        .iter()
        .map(|&(p, e)| e * x.abs().powi(p as i32))
        .sum()
}
