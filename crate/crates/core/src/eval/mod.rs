//! Prediction with a learned model, ensemble statistics and comparison against
//! ground truth.

mod checks;
mod compare;
mod density;
mod model;
mod svg;

pub use checks::{
    affine_form, coefficient_bound, coefficient_errors, dominant_wave, drift_check, noise_checks,
    sweep_check, Check, NEGLIGIBLE_COEFFICIENT,
};
pub use compare::{compare_functions, ComparisonRow, FunctionComparison};
pub use density::{conditional_density, linspace, silverman_bandwidth, trapezoid, DensityEstimate};
pub use model::{
    effective_coefficients, effective_diffusion, effective_drift, one_step_samples, predict_step,
    reference_rollout, rollout, rollout_endpoints, trajectory_stats, EffectiveCoefficients,
    EnsembleStats, LearnedSde,
};
pub use svg::{line_plot, Series};
