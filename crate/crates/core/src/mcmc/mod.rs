//! Fully Gibbs posterior sampling.
//!
//! The latent branching structure turns every update except those of the
//! decays and mark shapes into a conjugate Gamma draw; the remaining two are
//! log-concave and sampled by adaptive rejection sampling.

pub mod ars;
pub mod chain;
pub mod gibbs;
pub mod hyper;

use thiserror::Error;

pub use ars::{ars_sample, ArsError};
pub use chain::{run_chain, ChainOptions, PosteriorChain, Snapshot};
pub use gibbs::{ChainData, ChainState, GibbsSampler, Theta};
pub use hyper::{GammaPrior, Hyperparams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McmcError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("log posterior evaluated outside its domain at {0}")]
    DomainError(f64),
    #[error("adaptive rejection sampling of {parameter} failed: {source}")]
    Ars { parameter: String, source: ArsError },
    #[error("non-finite or non-positive {parameter} = {value} after iteration {iteration}")]
    NonFiniteState { iteration: usize, parameter: String, value: f64 },
    #[error("invalid stream: {0}")]
    Stream(#[from] crate::stream::StreamError),
    #[error("stream dimension {stream} does not match hyperparameter dimension {hyper}")]
    DimensionMismatch { stream: usize, hyper: usize },
}
