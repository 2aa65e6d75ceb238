use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            armijo: 1e-4,
            max_iters: 100,
            grad_tol: 1e-10,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Set when a line search could not find a decrease; `params` is then the best
    /// point seen.
    pub line_search_failed: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with a backtracking Armijo line search.
///
/// `objective(params, grad)` returns the value and writes the gradient. The
/// returned value never exceeds the value at the starting point.
pub fn lbfgs_refine<F>(mut objective: F, start: &[f64], cfg: &LbfgsConfig) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = start.len();
    let mut x = start.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return LbfgsOutcome {
            params: x,
            value: f,
            iterations: 0,
            line_search_failed: true,
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut failed = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        if g.iter().all(|v| v.abs() <= cfg.grad_tol) {
            break;
        }
        iterations += 1;

        // two-loop recursion for d = -H g
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / dot(&g, &g).sqrt().max(1.0),
        };
        for qi in &mut q {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..cfg.max_backtracks {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = objective(&x_new, &mut g_new);
            if f_new.is_finite()
                && g_new.iter().all(|v| v.is_finite())
                && f_new <= f + cfg.armijo * step * slope
            {
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
                    if history.len() == cfg.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            failed = true;
            break;
        }
    }
    LbfgsOutcome {
        params: x,
        value: f,
        iterations,
        line_search_failed: failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let out = lbfgs_refine(
            |p, g| {
                g[0] = 2.0 * (p[0] - 3.0);
                (p[0] - 3.0).powi(2)
            },
            &[0.0],
            &LbfgsConfig::default(),
        );
        assert!((out.params[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn optimal_start_is_unchanged() {
        let out = lbfgs_refine(
            |p, g| {
                g[0] = 2.0 * (p[0] - 3.0);
                (p[0] - 3.0).powi(2)
            },
            &[3.0],
            &LbfgsConfig::default(),
        );
        assert_eq!(out.params, vec![3.0]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let cfg = LbfgsConfig {
            max_iters: 1000,
            ..LbfgsConfig::default()
        };
        let out = lbfgs_refine(
            |p, g| {
                let (x, y) = (p[0], p[1]);
                g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
                g[1] = 200.0 * (y - x * x);
                (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
            },
            &[-1.2, 1.0],
            &cfg,
        );
        assert!(out.value < 1e-6, "value {}", out.value);
        assert!((out.params[0] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn never_worse_than_start() {
        // non-smooth objective with a wrong gradient: the line search must fail
        // without accepting an increase
        let out = lbfgs_refine(
            |p, g| {
                g[0] = -1.0;
                p[0].abs()
            },
            &[0.0],
            &LbfgsConfig::default(),
        );
        assert!(out.value <= 0.0);
        assert!(out.line_search_failed);
    }
}
