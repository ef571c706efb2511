//! Second-step estimator: data augmentation over the latent classes and
//! latents, Gibbs and adaptive-rejection updates for the class and mean
//! coefficients, random-walk Metropolis for the scales, and the
//! feasibility-preserving elementwise sampler for the correlation
//! coefficients.

mod chain;
mod config;
mod corr_sampler;
mod store;

pub use chain::{run_chain, run_chains, Chain, ChainOutput, ChainStats};
pub use config::{KernelMode, PriorConfig, SamplerConfig};
pub use corr_sampler::{CorrelationSampler, CHUNK};
pub use store::{DrawStore, RunMetadata};

use thiserror::Error;

use crate::model::ModelError;
use crate::samplers::{ArsError, TruncNormError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("correlation constraint violated: {0}")]
    Infeasible(String),
    #[error("cached inverses drifted by {0:e} from dense recomputation")]
    CacheDrift(f64),
    #[error("adaptive rejection sampling failed in {block}: {source}")]
    Ars { block: String, source: ArsError },
    #[error("truncated normal draw failed: {0}")]
    TruncNorm(#[from] TruncNormError),
    #[error("retained draw at iteration {iteration} of chain {chain} is infeasible at {points} test points")]
    RetainedInfeasible { chain: usize, iteration: usize, points: usize },
    #[error("draw store: {0}")]
    Store(String),
}
