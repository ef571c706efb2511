//! Correlation vectors, their matrix assembly, and the cached
//! (inverse, determinant) working state with Sherman–Morrison updates.

use serde::{Deserialize, Serialize};

use super::cholesky::{spd_inverse_and_det, CholeskyFactor};
use super::matrix::Matrix;
use super::LinalgError;

/// Denominators closer to zero than this make a rank-1 update singular.
pub const SINGULAR_UPDATE_TOL: f64 = 1e-14;

/// Number of distinct off-diagonal correlations of a `dim × dim` matrix.
#[inline]
pub const fn pair_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

/// Maps matrix position `(row, col)` with `row > col` to its index in the
/// lower-triangle, column-major vectorization.
///
/// For `dim = 4` the order is (1,0), (2,0), (3,0), (2,1), (3,1), (3,2).
pub fn pair_index(dim: usize, row: usize, col: usize) -> usize {
    debug_assert!(row > col && row < dim);
    // columns 0..col contribute (dim-1) + (dim-2) + ... entries
    let before = col * (2 * dim - col - 1) / 2;
    before + (row - col - 1)
}

/// Lookup table between pair indices and `(row, col)` positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLayout {
    dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairLayout {
    pub fn new(dim: usize) -> Self {
        let mut pairs = Vec::with_capacity(pair_count(dim));
        for col in 0..dim {
            for row in col + 1..dim {
                pairs.push((row, col));
            }
        }
        Self { dim, pairs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(row, col)` of pair `l`, with `row > col`.
    #[inline]
    pub fn position(&self, l: usize) -> (usize, usize) {
        self.pairs[l]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

/// The `L = K(K-1)/2` distinct correlations of a `K × K` correlation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector {
    dim: usize,
    values: Vec<f64>,
}

impl CorrelationVector {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self, LinalgError> {
        if values.len() != pair_count(dim) {
            return Err(LinalgError::LengthMismatch {
                expected: pair_count(dim),
                found: values.len(),
            });
        }
        Ok(Self { dim, values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; pair_count(dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Builds the symmetric unit-diagonal matrix. No positive-definiteness check.
    pub fn assemble(&self) -> Matrix {
        let mut m = Matrix::identity(self.dim);
        assemble_into(self.dim, &self.values, m.as_mut_slice());
        m
    }
}

/// Assembles `R(rho)` for a matrix of side `dim`.
pub fn assemble_matrix(dim: usize, rho: &[f64]) -> Result<Matrix, LinalgError> {
    Ok(CorrelationVector::new(dim, rho.to_vec())?.assemble())
}

/// Writes `R(rho)` into a row-major `dim × dim` buffer.
pub fn assemble_into(dim: usize, rho: &[f64], out: &mut [f64]) {
    debug_assert_eq!(rho.len(), pair_count(dim));
    debug_assert_eq!(out.len(), dim * dim);
    let mut l = 0;
    for col in 0..dim {
        out[col * dim + col] = 1.0;
        for row in col + 1..dim {
            out[row * dim + col] = rho[l];
            out[col * dim + row] = rho[l];
            l += 1;
        }
    }
}

/// A correlation matrix held jointly with its inverse and determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationState {
    matrix: Matrix,
    inverse: Matrix,
    det: f64,
}

impl CorrelationState {
    /// Dense construction; fails when `matrix` is not positive definite.
    pub fn from_matrix(matrix: Matrix) -> Result<Self, LinalgError> {
        let (inverse, det) = spd_inverse_and_det(&matrix)?;
        Ok(Self {
            matrix,
            inverse,
            det,
        })
    }

    pub fn from_correlations(rho: &CorrelationVector) -> Result<Self, LinalgError> {
        Self::from_matrix(rho.assemble())
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor, LinalgError> {
        CholeskyFactor::of_matrix(&self.matrix)
    }

    /// Sherman–Morrison update to `M + u vᵀ` with the matrix determinant lemma.
    pub fn rank1_inverse_det_update(&self, u: &[f64], v: &[f64]) -> Result<Self, LinalgError> {
        let k = self.dim();
        if u.len() != k || v.len() != k {
            return Err(LinalgError::LengthMismatch {
                expected: k,
                found: u.len().min(v.len()),
            });
        }
        let inv = &self.inverse;
        let ainv_u = inv.mat_vec(u);
        // vᵀ A⁻¹
        let vt_ainv: Vec<f64> = (0..k)
            .map(|c| (0..k).map(|r| v[r] * inv[(r, c)]).sum())
            .collect();
        let denom = 1.0 + super::matrix::dot(v, &ainv_u);
        if denom.abs() < SINGULAR_UPDATE_TOL {
            return Err(LinalgError::SingularUpdate { denominator: denom });
        }
        let inverse = Matrix::from_fn(k, k, |r, c| inv[(r, c)] - ainv_u[r] * vt_ainv[c] / denom);
        let matrix = Matrix::from_fn(k, k, |r, c| self.matrix[(r, c)] + u[r] * v[c]);
        Ok(Self {
            matrix,
            inverse,
            det: denom * self.det,
        })
    }

    /// Adds `eps` to entries `(k1, k2)` and `(k2, k1)` through two rank-1
    /// Sherman–Morrison steps, `M + s·w₁w₂ᵀ` then `+ w₂(s·w₁)ᵀ`.
    pub fn perturb_offdiagonal(&self, k1: usize, k2: usize, eps: f64) -> Result<Self, LinalgError> {
        let k = self.dim();
        check_pair(k, k1, k2)?;
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let mut inverse = Matrix::zeros(k, k);
        let mut scratch = vec![0.0; 2 * k];
        let ratio = offdiag_inverse_update(
            self.inverse.as_slice(),
            inverse.as_mut_slice(),
            &mut scratch,
            k,
            k1,
            k2,
            eps,
        )?;
        let mut matrix = self.matrix.clone();
        matrix[(k1, k2)] += eps;
        matrix[(k2, k1)] += eps;
        Ok(Self {
            matrix,
            inverse,
            det: self.det * ratio,
        })
    }
}

pub(crate) fn check_pair(dim: usize, k1: usize, k2: usize) -> Result<(), LinalgError> {
    if k1 == k2 || k1 >= dim || k2 >= dim {
        return Err(LinalgError::InvalidPair { k1, k2, dim });
    }
    Ok(())
}

/// Hot-path kernel behind [`CorrelationState::perturb_offdiagonal`].
///
/// Reads the current inverse from `inv`, writes the inverse of the matrix with
/// `eps` added at `(k1, k2)` and `(k2, k1)` into `out`, and returns the
/// determinant ratio `|M'| / |M|`. `scratch` must hold at least `2 * dim`
/// values. Cost is `O(dim²)`.
pub fn offdiag_inverse_update(
    inv: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
    dim: usize,
    k1: usize,
    k2: usize,
    eps: f64,
) -> Result<f64, LinalgError> {
    let k = dim;
    let (col, row) = scratch[..2 * k].split_at_mut(k);

    // step 1: A + eps e_k1 e_k2ᵀ
    let denom1 = 1.0 + eps * inv[k2 * k + k1];
    if denom1.abs() < SINGULAR_UPDATE_TOL {
        return Err(LinalgError::SingularUpdate { denominator: denom1 });
    }
    let f1 = eps / denom1;
    for r in 0..k {
        col[r] = inv[r * k + k1] * f1;
        row[r] = inv[k2 * k + r];
    }
    for r in 0..k {
        let cr = col[r];
        let src = &inv[r * k..(r + 1) * k];
        let dst = &mut out[r * k..(r + 1) * k];
        for c in 0..k {
            dst[c] = src[c] - cr * row[c];
        }
    }

    // step 2: + eps e_k2 e_k1ᵀ, applied to the updated inverse in `out`
    let denom2 = 1.0 + eps * out[k1 * k + k2];
    if denom2.abs() < SINGULAR_UPDATE_TOL {
        return Err(LinalgError::SingularUpdate { denominator: denom2 });
    }
    let f2 = eps / denom2;
    for r in 0..k {
        col[r] = out[r * k + k2] * f2;
        row[r] = out[k1 * k + r];
    }
    for r in 0..k {
        let cr = col[r];
        let dst = &mut out[r * k..(r + 1) * k];
        for c in 0..k {
            dst[c] -= cr * row[c];
        }
    }
    Ok(denom1 * denom2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_numbering_follows_lower_triangle_column_major() {
        let layout = PairLayout::new(4);
        let expected = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)];
        for (l, pos) in expected.iter().enumerate() {
            assert_eq!(layout.position(l), *pos);
            assert_eq!(pair_index(4, pos.0, pos.1), l);
        }
    }

    #[test]
    fn assemble_examples() {
        let id = assemble_matrix(2, &[0.0]).unwrap();
        assert_eq!(id, Matrix::identity(2));

        let rho: Vec<f64> = (1..=6).map(|v| v as f64 / 10.0).collect();
        let m = assemble_matrix(4, &rho).unwrap();
        // entry (3,2) in one-based numbering is rho_4
        assert_eq!(m[(2, 1)], 0.4);
        assert_eq!(m[(1, 2)], 0.4);

        let m = assemble_matrix(3, &[0.5, 0.2, -0.1]).unwrap();
        assert_eq!(m[(2, 0)], 0.2);
        assert_eq!(m[(2, 1)], -0.1);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn assemble_rejects_length_mismatch() {
        assert!(matches!(
            assemble_matrix(3, &[0.1, 0.2]),
            Err(LinalgError::LengthMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn rank1_update_examples() {
        let s = CorrelationState::from_matrix(Matrix::identity(2)).unwrap();
        let t = s.rank1_inverse_det_update(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(t.det(), 1.0);
        assert_eq!(t.inverse().as_slice(), &[1.0, -1.0, 0.0, 1.0]);

        let t = s.rank1_inverse_det_update(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(t.det(), 2.0);
        assert_eq!(t.inverse().as_slice(), &[0.5, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn singular_rank1_update_is_reported() {
        let s = CorrelationState::from_matrix(Matrix::identity(2)).unwrap();
        let err = s.rank1_inverse_det_update(&[-1.0, 0.0], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, LinalgError::SingularUpdate { .. }));
    }

    #[test]
    fn perturb_examples() {
        let s = CorrelationState::from_matrix(Matrix::identity(3)).unwrap();
        assert_eq!(s.perturb_offdiagonal(1, 0, 0.0).unwrap(), s);
        let t = s.perturb_offdiagonal(1, 0, 0.5).unwrap();
        assert!((t.det() - 0.75).abs() < 1e-15);
        assert_eq!(t.matrix()[(0, 1)], 0.5);
        assert!(matches!(
            s.perturb_offdiagonal(1, 1, 0.1),
            Err(LinalgError::InvalidPair { .. })
        ));
    }
}
