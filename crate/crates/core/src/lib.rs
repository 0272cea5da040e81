//! Bayesian Weibull multi-state models for hip-fracture follow-up:
//! competing risks (fracture -> refracture, fracture -> death) and the
//! illness-death extension with death after refracture on a clock reset at
//! refracture.

pub mod bayes;
#[cfg(feature = "cli")]
pub mod cli;
pub mod cohort;
pub mod error;
pub mod hazard;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod outcome;
pub mod simulate;
pub mod sum;

pub use error::{Error, RecordViolation, Result};
