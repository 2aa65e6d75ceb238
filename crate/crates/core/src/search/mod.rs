//! Reinforcement-learning-guided search over operator sequences.
//!
//! A controller proposes operator sequences for a fixed tree template; each
//! sequence is scored by fitting its parameters, the controller is updated with a
//! risk-seeking policy gradient, and the best distinct sequences are kept in a pool
//! that is fine-tuned once the search ends.

mod config;
mod controller;
mod pool;
mod run;
mod score;

pub use config::{RefineConfig, ScoreConfig, SearchConfig};
pub use controller::{risk_threshold, Controller, SampledSequence};
pub use pool::CandidatePool;
pub use run::{
    fit_drift, refine_pool, run_search, search_dimension, write_search_log, DriftFit,
    RefinedCandidate, SearchLogRow, SearchOutcome,
};
pub use score::{
    compute_score, fit_parameters, penalized_loss, score_from_loss, sequence_seed, Candidate,
    FitOptions, FitOutcome,
};
