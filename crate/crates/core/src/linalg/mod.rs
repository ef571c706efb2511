//! Correlation-matrix storage and incremental `O(K²)` kernels: Sherman–Morrison
//! inverse/determinant updates, Cholesky rank-1 modifications, and the
//! permute-and-rotate step that brings a target correlation into the last
//! off-diagonal position of a factor.

mod cholesky;
mod corr;
mod eigen;
mod matrix;

pub use cholesky::{
    chol_rank1_in_place, chol_rank1_modify, cholesky_upper, move_target_to_last,
    permute_and_retriangularize, perturb_chol_in_place, perturb_offdiagonal_chol,
    spd_inverse_and_det, spd_inverse_det_into, try_cholesky, CholeskyFactor, Sign, PIVOT_TOL,
};
pub use corr::{
    assemble_into, assemble_matrix, offdiag_inverse_update, pair_count, pair_index,
    CorrelationState, CorrelationVector, PairLayout, SINGULAR_UPDATE_TOL,
};
pub use eigen::symmetric_eigenvalues;
pub use matrix::{dot, quad_form, Matrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not symmetric with unit diagonal")]
    NotCorrelationMatrix,
    #[error("matrix is not upper triangular")]
    NotTriangular,
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("rank-1 update is singular (denominator {denominator:e})")]
    SingularUpdate { denominator: f64 },
    #[error("Cholesky downdate lost positive definiteness at pivot {pivot}")]
    DowndateFailed { pivot: usize },
    #[error("invalid off-diagonal position ({k1}, {k2}) for dimension {dim}")]
    InvalidPair { k1: usize, k2: usize, dim: usize },
}
