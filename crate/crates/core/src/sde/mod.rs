//! Ground-truth SDEs, Euler-Maruyama simulation, and dataset construction.

mod benchmarks;
mod data;
pub mod io;
mod simulate;
mod spec;

pub use benchmarks::{benchmark, Benchmark, BENCHMARK_NAMES};
pub use data::{drift_targets, forcing_center, make_pairs, RegressionSet, TransitionPairs};
pub use simulate::{euler_maruyama, simulate, InitialCondition, TrajectorySet};
pub use spec::{NoiseKind, SdeSpec, VectorField};
