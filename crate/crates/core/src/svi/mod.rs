//! Variational Bayesian fit of the structural model.
//!
//! The guide is a diagonal Gaussian over unconstrained coordinates
//! (positive coefficients live in log space). Each step draws reparameterised
//! samples, evaluates log p(data, θ) − log q(θ) on a [`Tape`](crate::grad::Tape)
//! and moves the guide with Adam.

mod adam;
mod elbo;
mod guide;
pub mod likelihood;
mod prior;
mod train;

pub use adam::{adam_step, AdamState};
pub use elbo::{draw_noise, elbo_custom, fd_relative_error, FD_FLOOR, elbo_estimate, elbo_with_noise, ElboEstimate};
pub use guide::{GuideEntry, GuideState};
pub use likelihood::{log_likelihood, prepare, PreparedRecord};
pub use prior::{latent_map, log_prior, Family, PriorEntry, PriorSpec, LOG_SCALE, SIGMA1, SIGMA2, SIGMA3};
pub use train::{
    elbo_trace_csv, posterior_predict, posterior_predict_mc, posterior_summary, train, LatentSummary,
    PosteriorSnapshot, TrainConfig, TrainReport,
};

use crate::grad::GradError;
use crate::scm::ScmError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SviError {
    #[error("no prior value for latent `{0}`")]
    MissingLatent(String),
    #[error("non-finite ELBO {value} at latents {latents:?}")]
    NonFinite { value: f64, latents: Vec<(String, f64)> },
    #[error("non-finite gradient at coordinate {index}")]
    NonFiniteGradient { index: usize },
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Scm(#[from] ScmError),
}

#[cfg(test)]
mod tests;
