//! Learning stochastic differential equations from trajectory data.
//!
//! The pipeline has two stages. The drift of each state coordinate is found by a
//! reinforcement-learning-guided search over small symbolic expression trees
//! ([`search`]). The noise left over after subtracting the learned drift is then
//! modeled generatively: a probability-flow ODE with a Monte Carlo score maps
//! Gaussian draws onto residual samples, and a small decoder network is fit to
//! those pairs ([`noise`]).
//!
//! [`sde`] holds the ground-truth systems and the Euler-Maruyama simulator used to
//! produce training data, and [`eval`] the prediction and diagnostic tooling.

pub mod error;
pub mod eval;
pub mod expr;
pub mod noise;
pub mod numerics;
pub(crate) mod par;
pub mod preset;
pub mod rng;
pub mod sde;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
