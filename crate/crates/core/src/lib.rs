//! Statistical agnostic regression (SAR).
//!
//! Fits linear regressors (ordinary least squares and a primal linear SVR),
//! upper-bounds their expected loss with a PAC-Bayes dropout bound and declares
//! the regression significant when the bounded risk falls strictly below the
//! expected loss obtained when predictors and response are orthogonal.
//!
//! Classical F and Breusch-Pagan tests, cross-validation risk estimators,
//! synthetic data generators and a Monte Carlo sweep harness are provided
//! alongside, so the agnostic test can be compared against the usual tools.
//!
//! # Module Structure
//!
//! - [`data`] - datasets, linear models, losses, standardization and folds
//! - [`rng`] - the seeded PRNG contract and normal sampling
//! - [`generators`] - synthetic data, cluster pruning, CSV ingestion, VIF
//! - [`regressors`] - OLS and linear SVR
//! - [`risk`] - losses, empirical risk, null thresholds and the PAC-Bayes increment
//! - [`sar`] - the SAR decision
//! - [`special`] - incomplete beta/gamma functions and the F / chi-squared CDFs
//! - [`classical`] - F-test for the slope and Breusch-Pagan test
//! - [`harness`] - cross-validation, Monte Carlo sweeps, power and fold variability

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod data;
pub mod error;
pub mod generators;
pub mod harness;
pub mod linalg;
pub mod regressors;
pub mod risk;
pub mod rng;
pub mod sar;
pub mod special;

pub use data::{Dataset, LinearModel, LossKind};
pub use error::{Error, Result};
