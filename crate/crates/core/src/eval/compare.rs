use std::io::Write;

use super::model::csv_error;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub x: f64,
    pub learned: f64,
    pub truth: f64,
    pub in_training_domain: bool,
}

impl ComparisonRow {
    pub fn error(&self) -> f64 {
        (self.learned - self.truth).abs()
    }
}

/// Pointwise comparison of two scalar functions on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionComparison {
    pub rows: Vec<ComparisonRow>,
    /// Root mean square of the pointwise error.
    pub l2_error: f64,
    pub max_error: f64,
}

impl FunctionComparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "learned", "truth", "abs_error", "in_training_domain"])
            .map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.x.to_string(),
                r.learned.to_string(),
                r.truth.to_string(),
                r.error().to_string(),
                u8::from(r.in_training_domain).to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates both functions on `grid`; points inside `training` are flagged.
pub fn compare_functions(
    learned: impl Fn(f64) -> f64,
    truth: impl Fn(f64) -> f64,
    grid: &[f64],
    training: (f64, f64),
) -> Result<FunctionComparison> {
    if grid.is_empty() {
        return Err(Error::config("comparison grid is empty"));
    }
    let rows: Vec<ComparisonRow> = grid
        .iter()
        .map(|&x| ComparisonRow {
            x,
            learned: learned(x),
            truth: truth(x),
            in_training_domain: training.0 <= x && x <= training.1,
        })
        .collect();
    let sq: f64 = rows.iter().map(|r| r.error().powi(2)).sum();
    let max_error = rows.iter().map(ComparisonRow::error).fold(0.0, f64::max);
    Ok(FunctionComparison {
        l2_error: (sq / rows.len() as f64).sqrt(),
        max_error,
        rows,
    })
}
