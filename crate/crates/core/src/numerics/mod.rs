//! Dense networks and the optimizers shared by the controller and the decoder.

mod adam;
mod dense;
mod lbfgs;
mod schedule;

pub use adam::{Adam, AdamConfig, Sgd, StepStatus};
pub use dense::{Activation, BatchCache, DenseNet, ForwardCache};
pub use lbfgs::{lbfgs_refine, LbfgsConfig, LbfgsOutcome};
pub use schedule::CosineSchedule;
