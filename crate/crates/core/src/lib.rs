//! Differential-equation-constrained local polynomial regression.
//!
//! The DE1-k estimators fit a single local parameter `g(x₀)` through a
//! degree-k Taylor approximant whose derivatives are dictated by a known
//! first-order differential equation. The crate also provides the classical
//! local polynomial baselines, bandwidth selection, leading-order asymptotic
//! formulas, parametric exponential fits and a Monte-Carlo study harness.

pub mod asymptotics;
pub mod bandwidth;
pub mod cli;
pub mod data;
pub mod delocal;
pub mod error;
pub mod estimator;
pub mod kernel;
mod linalg;
pub mod localpoly;
pub mod parametric;
pub mod simulation;

pub use data::{Dataset, Fit};
pub use error::{Error, ErrorClass, Result};
pub use estimator::{fit_method, Estimator, Method};
pub use kernel::Kernel;
