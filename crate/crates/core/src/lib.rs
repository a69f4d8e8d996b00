//! Minimum-energy / total-variation control of the double integrator.
//!
//! * [`analytic`]: closed-form and structural solutions with a
//!   maximum-principle checker;
//! * [`oracle`]: an independent direct-transcription solver;
//! * [`pareto`]: weighted-sum sweeps of the energy / variation front.

// `!(x > 0.0)` rejects NaN as well; the banded and stage loops index
// several arrays in step.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod error;
pub mod functional;
pub mod oracle;
pub mod pareto;
pub mod piecewise;
pub mod problem;

pub use error::{Error, Result};
pub use problem::{BoundaryConditions, Weight};
