//! Personalized generalized safety index (GSI) for human-robot proximity.
//!
//! - [`safety`]: the closed-form index, proxemics zones, rho-sensitivity curves.
//! - [`estimation`]: maximum-likelihood fitting of the personalization exponent.
//! - [`simulator`]: synthetic approach episodes and rated participant cohorts.
//! - [`analytics`]: descriptive statistics, rank tests, KDE and mean-shift clustering.
//! - [`io`]: record formats, run configuration and the command implementations.

pub mod analytics;
pub mod error;
pub mod estimation;
pub mod io;
pub mod safety;
pub mod simulator;

pub use error::{Error, Result};
