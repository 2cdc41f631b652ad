//! Optimal prediction of the last-passage time of a transient diffusion.
//!
//! For a diffusion `X` on `(0, inf)` drifting to infinity and a level
//! `z > 0`, the last time `gamma_z` that `X` visits `z` is not a stopping
//! time. This crate computes the stopping rule `tau* = inf{t : X_t >= r*}`
//! minimizing `E|tau - gamma_z|`, the associated value function, numerical
//! certificates for the free-boundary problem it solves, and a Monte Carlo
//! estimator of the objective.

// `!(x > 0.0)` is used on purpose so NaN fails domain checks; reference
// constants keep every digit they were computed with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod cost;
pub mod diffusion;
pub mod error;
pub mod expr;
pub mod montecarlo;
pub mod quad;
pub mod roots;
pub mod solver;
pub mod valuation;

pub use cost::CostFunction;
pub use diffusion::{DiffusionModel, ModelSpec, OriginBoundary, PowerLawFamily, ValidationReport};
pub use error::{Error, Result};
pub use solver::{BoundarySolution, SolveMethod};
pub use valuation::{ValueCurve, ValueFunction, VerificationReport};
