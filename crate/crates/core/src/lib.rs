//! Threshold predictive regressions with stochastic local-unit-root regressors.

pub mod cli;
pub mod dgp;
pub mod error;
pub mod estimate;
pub mod innovations;
pub mod ivx;
pub mod limitsim;
pub mod linalg;
pub mod mc;
pub mod persistence;
pub mod provenance;
mod regime;
pub mod rng;
pub mod stats;
pub mod wald;

pub use error::{Error, Result};
