//! Symbolic expressions as parameterized binary trees.

mod instance;
mod json;
mod ops;
mod symbolic;
mod template;

pub use instance::{BatchWorkspace, EvalTrace, ExpressionInstance};
pub use json::EXPRESSION_FORMAT_VERSION;
pub use ops::{BinaryOp, Operator, OperatorSet, UnaryOp};
pub use symbolic::{Atom, Polynomial, Symbolic};
pub use template::{OperatorSequence, SlotKind, TreeTemplate};
