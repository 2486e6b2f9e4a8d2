//! Panel econometrics engine for state-by-year employment analysis.
//!
//! The crate assembles annual state panels from CSV extracts, estimates
//! pooled OLS, state fixed-effects, and two-stage least squares models with
//! robust covariance, runs endogeneity and instrument diagnostics, derives
//! delta-method marginal effects by state, and validates the whole estimator
//! stack against a seeded Monte Carlo harness with known truth.

pub mod config;
pub mod diagnostics;
pub mod effects;
mod error;
pub mod estimators;
pub mod linalg;
pub mod montecarlo;
pub mod panel;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
