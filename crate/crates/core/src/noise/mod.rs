//! Generative model of the residual noise.
//!
//! Residuals are noised toward a standard Gaussian by a fixed linear schedule.
//! Solving the reverse probability-flow ODE, with a Monte Carlo score computed
//! directly from residual samples, maps Gaussian inputs to residual-like outputs;
//! a small decoder is then fit to those input/output pairs.

mod decoder;
mod ode;
mod pairs;
mod residuals;
mod schedule;

pub use decoder::{sample_noise, train_decoder, DecoderConfig, DecoderModel};
pub use ode::{mc_score, reverse_ode_solve, reverse_tail};
pub use pairs::{build_pairs, LabeledPairs, PairConfig, PairMeta};
pub use residuals::{residuals, ResidualSet};
pub use schedule::DiffusionSchedule;
