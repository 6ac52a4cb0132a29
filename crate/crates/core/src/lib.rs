//! Causal Bayesian model of hourly electricity demand.
//!
//! The crate is organised along the data flow:
//!
//! - [`data`]: hourly records, unit conversion, CSV ingestion and joins
//! - [`scm`]: the structural equations linking calendar, weather and demand
//! - [`grad`]: reverse-mode differentiation used by the variational fit
//! - [`svi`]: priors, the diagonal Gaussian guide, ELBO and Adam training
//! - [`analysis`]: regressions and diagnostics for confounding
//! - [`eval`]: MAPE scoring, hold-out and k-fold evaluation

pub mod data;
pub mod grad;
pub mod scm;
pub mod svi;
pub mod analysis;
pub mod eval;
