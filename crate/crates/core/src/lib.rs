//! Differentiable direct-stiffness analysis of space trusses and frames,
//! with adjoint sensitivities and gradient-based shape and sizing design.

// `!(a <= b)` is used on purpose so NaN fails checks; index loops mirror the matrix algebra
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod analysis;
pub mod assembly;
pub mod elements;
pub mod error;
pub mod fixtures;
pub mod functions;
pub mod model;
pub mod optimize;
pub mod par;
pub mod report;
pub mod solve;

pub use analysis::{Analysis, Analyzer};
pub use error::{Error, Result};
pub use model::{load_problem, Problem};
pub use optimize::{optimize_problem, OptimizationResult, OptimizerSettings};
