//! The probability model: probit measurement equations for each item block,
//! a multivariate normal structural model `η ~ N(βᵀX, S R(αᵀX) S)`, and a
//! two-sided zero-inflation class model with multinomial-logit probabilities.

mod data;
mod likelihood;
mod params;
mod simulate;
mod spec;

pub use data::{Dataset, LatentState, MISSING};
pub use likelihood::{block_log_prob, 
    class_probs, item_prob, log_class_probs, structural_moments, unit_loglik, DEFAULT_QUAD_NODES,
};
pub use params::{ItemParams, MeasurementParams, StructuralParams};
pub use simulate::{mask_missing, simulate_dataset};
pub use spec::{ClassSideSpec, DimSpec, FixedAlpha, ModelSpec, ModelSpecDoc, Scale, CELL_NAMES};

use thiserror::Error;

use crate::feasibility::FeasibilityError;
use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("unsupported model shape: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
