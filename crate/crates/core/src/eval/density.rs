use std::io::Write;

use super::model::csv_error;
use crate::error::{Error, Result};

/// Density values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid integral of the values over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "density"]).map_err(csv_error)?;
        for (x, p) in self.grid.iter().zip(&self.values) {
            w.write_record([x.to_string(), p.to_string()])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Silverman's rule of thumb: `0.9 min(s, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let s = crate::stats::std(samples, 1)[0];
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        sorted[i] + f * (sorted[(i + 1).min(n - 1)] - sorted[i])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Gaussian kernel density of scalar samples on `grid`, normalized to unit
/// trapezoid mass. `bandwidth = None` uses Silverman's rule.
///
/// Samples with no spread at the resolution of the grid give a narrow bump one
/// grid spacing wide.
pub fn conditional_density(
    samples: &[f64],
    grid: &[f64],
    bandwidth: Option<f64>,
) -> Result<DensityEstimate> {
    if samples.len() < 100 {
        return Err(Error::config(format!(
            "density estimation needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(
            "density grid must be increasing with at least two points",
        ));
    }
    let mut h = bandwidth.unwrap_or_else(|| silverman_bandwidth(samples));
    let spacing = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h > 1e-3 * spacing) {
        log::warn!("samples have no spread; using a bandwidth of one grid spacing");
        h = spacing;
    }
    let inv = 1.0 / h;
    let mut values: Vec<f64> = grid
        .iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&s| {
                    let u = (g - s) * inv;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let mass = trapezoid(grid, &values);
    if !(mass > 0.0) {
        return Err(Error::numerical("samples lie outside the density grid"));
    }
    for v in &mut values {
        *v /= mass;
    }
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        bandwidth: h,
    })
}
