//! Upper-triangular Cholesky factors `R = ΓᵀΓ` and their `O(K²)` modifications.

use super::corr::check_pair;
use super::matrix::Matrix;
use super::LinalgError;

/// A leading pivot must exceed this for a matrix to count as positive definite.
pub const PIVOT_TOL: f64 = 1e-12;

const STRUCTURE_TOL: f64 = 1e-12;

/// Upper-triangular `Γ` with `ΓᵀΓ` equal to the factored matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    gamma: Matrix,
}

impl CholeskyFactor {
    /// Factors any symmetric positive-definite matrix (unit diagonal not required).
    pub fn of_matrix(m: &Matrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare);
        }
        let k = m.rows();
        let mut gamma = Matrix::zeros(k, k);
        cholesky_upper(m.as_slice(), gamma.as_mut_slice(), k)?;
        Ok(Self { gamma })
    }

    /// Wraps an existing upper-triangular factor. Entries below the diagonal
    /// must be zero and the diagonal strictly positive.
    pub fn from_upper(gamma: Matrix) -> Result<Self, LinalgError> {
        if !gamma.is_square() {
            return Err(LinalgError::NotSquare);
        }
        let k = gamma.rows();
        for r in 0..k {
            if gamma[(r, r)] <= 0.0 {
                return Err(LinalgError::NotPositiveDefinite { pivot: r });
            }
            for c in 0..r {
                if gamma[(r, c)] != 0.0 {
                    return Err(LinalgError::NotTriangular);
                }
            }
        }
        Ok(Self { gamma })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            gamma: Matrix::identity(k),
        }
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.rows()
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.gamma.as_mut_slice()
    }

    /// `ΓᵀΓ`.
    pub fn reconstruct(&self) -> Matrix {
        self.gamma.transpose().matmul(&self.gamma)
    }

    pub fn det(&self) -> f64 {
        (0..self.dim()).map(|i| self.gamma[(i, i)].powi(2)).product()
    }

    /// Factor of `ΓᵀΓ + sign·wwᵀ`.
    pub fn rank1_modify(&self, w: &[f64], sign: Sign) -> Result<Self, LinalgError> {
        chol_rank1_modify(self, w, sign)
    }
}

/// Direction of a rank-1 modification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Update,
    Downdate,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Update => 1.0,
            Sign::Downdate => -1.0,
        }
    }
}

/// Cholesky factorization of a correlation matrix; `NotPositiveDefinite` when
/// any pivot is at or below [`PIVOT_TOL`].
pub fn try_cholesky(m: &Matrix) -> Result<CholeskyFactor, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare);
    }
    if !m.is_symmetric(STRUCTURE_TOL) {
        return Err(LinalgError::NotCorrelationMatrix);
    }
    if (0..m.rows()).any(|i| (m[(i, i)] - 1.0).abs() > STRUCTURE_TOL) {
        return Err(LinalgError::NotCorrelationMatrix);
    }
    CholeskyFactor::of_matrix(m)
}

/// Writes the upper factor of the row-major `k × k` matrix `m` into `out`.
pub fn cholesky_upper(m: &[f64], out: &mut [f64], k: usize) -> Result<(), LinalgError> {
    out[..k * k].fill(0.0);
    for j in 0..k {
        let mut s = m[j * k + j];
        for p in 0..j {
            let g = out[p * k + j];
            s -= g * g;
        }
        if !(s > PIVOT_TOL) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let d = s.sqrt();
        out[j * k + j] = d;
        for i in j + 1..k {
            let mut t = m[j * k + i];
            for p in 0..j {
                t -= out[p * k + j] * out[p * k + i];
            }
            out[j * k + i] = t / d;
        }
    }
    Ok(())
}

/// Dense inverse and determinant of a symmetric positive-definite matrix.
pub fn spd_inverse_and_det(m: &Matrix) -> Result<(Matrix, f64), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare);
    }
    let k = m.rows();
    let mut inv = Matrix::zeros(k, k);
    let mut work = vec![0.0; k * k];
    let det = spd_inverse_det_into(m.as_slice(), inv.as_mut_slice(), &mut work, k)?;
    Ok((inv, det))
}

/// Slice form of [`spd_inverse_and_det`]; `work` needs `k * k` entries.
pub fn spd_inverse_det_into(
    m: &[f64],
    inv: &mut [f64],
    work: &mut [f64],
    k: usize,
) -> Result<f64, LinalgError> {
    cholesky_upper(m, work, k)?;
    let det = (0..k).map(|i| work[i * k + i] * work[i * k + i]).product();
    upper_inverse_in_place(work, k);
    // M⁻¹ = Γ⁻¹ Γ⁻ᵀ, with Γ⁻¹ upper triangular
    for r in 0..k {
        for c in r..k {
            let start = c.max(r);
            let mut s = 0.0;
            for p in start..k {
                s += work[r * k + p] * work[c * k + p];
            }
            inv[r * k + c] = s;
            inv[c * k + r] = s;
        }
    }
    Ok(det)
}

fn upper_inverse_in_place(u: &mut [f64], k: usize) {
    for j in (0..k).rev() {
        let d = 1.0 / u[j * k + j];
        u[j * k + j] = d;
        for i in (0..j).rev() {
            let mut s = 0.0;
            for p in i + 1..=j {
                s += u[i * k + p] * u[p * k + j];
            }
            u[i * k + j] = -s / u[i * k + i];
        }
    }
}

/// Rank-1 update or downdate of an upper factor, `O(K²)`.
pub fn chol_rank1_modify(
    gamma: &CholeskyFactor,
    w: &[f64],
    sign: Sign,
) -> Result<CholeskyFactor, LinalgError> {
    let k = gamma.dim();
    if w.len() != k {
        return Err(LinalgError::LengthMismatch {
            expected: k,
            found: w.len(),
        });
    }
    let mut out = gamma.clone();
    let mut w = w.to_vec();
    chol_rank1_in_place(out.as_mut_slice(), &mut w, k, sign.value())?;
    Ok(out)
}

/// In-place kernel: `g` holds `Γ` (row-major, upper), `w` is consumed as workspace.
pub fn chol_rank1_in_place(g: &mut [f64], w: &mut [f64], k: usize, sign: f64) -> Result<(), LinalgError> {
    let Some(start) = w.iter().position(|&x| x != 0.0) else {
        return Ok(());
    };
    for j in start..k {
        let gjj = g[j * k + j];
        let wj = w[j];
        if wj == 0.0 {
            continue;
        }
        let arg = gjj * gjj + sign * wj * wj;
        if !(arg > PIVOT_TOL) {
            return Err(LinalgError::DowndateFailed { pivot: j });
        }
        let r = arg.sqrt();
        let c = r / gjj;
        let s = wj / gjj;
        g[j * k + j] = r;
        for i in j + 1..k {
            let gji = (g[j * k + i] + sign * s * w[i]) / c;
            g[j * k + i] = gji;
            w[i] = c * w[i] - s * gji;
        }
    }
    Ok(())
}

/// Factor of the matrix with `eps` added at `(k1, k2)` and `(k2, k1)`,
/// realized as three rank-1 modifications with `w = √|eps|(e_k1 + e_k2)`,
/// `w₁ = √|eps| e_k1`, `w₂ = √|eps| e_k2`.
///
/// For `eps > 0` the order is `+wwᵀ, −w₁w₁ᵀ, −w₂w₂ᵀ`. For `eps < 0` the two
/// updates `+w₁w₁ᵀ, +w₂w₂ᵀ` run before the single downdate `−wwᵀ`, so every
/// intermediate matrix is positive definite whenever the result is.
pub fn perturb_offdiagonal_chol(
    gamma: &CholeskyFactor,
    k1: usize,
    k2: usize,
    eps: f64,
) -> Result<CholeskyFactor, LinalgError> {
    let k = gamma.dim();
    check_pair(k, k1, k2)?;
    let mut out = gamma.clone();
    if eps != 0.0 {
        let mut w = vec![0.0; k];
        perturb_chol_in_place(out.as_mut_slice(), &mut w, k, k1, k2, eps)?;
    }
    Ok(out)
}

/// In-place kernel behind [`perturb_offdiagonal_chol`]; `w` is `k` scratch values.
pub fn perturb_chol_in_place(
    g: &mut [f64],
    w: &mut [f64],
    k: usize,
    k1: usize,
    k2: usize,
    eps: f64,
) -> Result<(), LinalgError> {
    if eps == 0.0 {
        return Ok(());
    }
    let a = eps.abs().sqrt();
    let mut run = |g: &mut [f64], idx: &[usize], sign: f64| {
        w[..k].fill(0.0);
        for &i in idx {
            w[i] = a;
        }
        chol_rank1_in_place(g, w, k, sign)
    };
    if eps > 0.0 {
        run(g, &[k1, k2], 1.0)?;
        run(g, &[k1], -1.0)?;
        run(g, &[k2], -1.0)?;
    } else {
        run(g, &[k1], 1.0)?;
        run(g, &[k2], 1.0)?;
        run(g, &[k1, k2], -1.0)?;
    }
    Ok(())
}

/// Re-triangularized factor of `PᵀRP`, where `P` moves variables `k2`, `k1`
/// (with `k1 > k2`) to positions `K-2`, `K-1` and keeps the others in order.
/// The target correlation then sits at `(K-1, K-2)` (zero-based).
pub fn move_target_to_last(
    gamma: &CholeskyFactor,
    k1: usize,
    k2: usize,
) -> Result<CholeskyFactor, LinalgError> {
    let k = gamma.dim();
    if !(k1 > k2 && k1 < k) {
        return Err(LinalgError::InvalidPair { k1, k2, dim: k });
    }
    let mut out = Matrix::zeros(k, k);
    permute_and_retriangularize(gamma.gamma().as_slice(), out.as_mut_slice(), k, k1, k2);
    Ok(CholeskyFactor { gamma: out })
}

/// Slice kernel for [`move_target_to_last`]. `out` receives the new factor.
pub fn permute_and_retriangularize(g: &[f64], out: &mut [f64], k: usize, k1: usize, k2: usize) {
    // column permutation: others in order, then k2, then k1
    let mut t = 0;
    let place = |src: usize, dst: usize, out: &mut [f64]| {
        for r in 0..k {
            out[r * k + dst] = g[r * k + src];
        }
    };
    for c in 0..k {
        if c != k1 && c != k2 {
            place(c, t, out);
            t += 1;
        }
    }
    place(k2, k - 2, out);
    place(k1, k - 1, out);

    if k1 == k - 1 && k2 == k - 2 {
        return;
    }

    // Givens rotations on adjacent rows, bottom-up within each column
    for col in 0..k {
        for i in (col + 1..k).rev() {
            let b = out[i * k + col];
            if b == 0.0 {
                continue;
            }
            let a = out[(i - 1) * k + col];
            let r = a.hypot(b);
            let (c, s) = (a / r, b / r);
            for j in col..k {
                let x = out[(i - 1) * k + j];
                let y = out[i * k + j];
                out[(i - 1) * k + j] = c * x + s * y;
                out[i * k + j] = -s * x + c * y;
            }
            out[i * k + col] = 0.0;
        }
    }
    for r in 0..k {
        if out[r * k + r] < 0.0 {
            for j in r..k {
                out[r * k + j] = -out[r * k + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::corr::assemble_matrix;

    #[test]
    fn identity_factor() {
        let f = try_cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(f.gamma(), &Matrix::identity(3));
    }

    #[test]
    fn two_by_two_factor() {
        let f = try_cholesky(&assemble_matrix(2, &[0.6]).unwrap()).unwrap();
        let g = f.gamma();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 0.6);
        assert_eq!(g[(1, 0)], 0.0);
        assert!((g[(1, 1)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn indefinite_three_by_three_is_rejected() {
        // det = 1 + 2(0.9)(0.9)(-0.9) - 3(0.81) = -2.888
        let m = assemble_matrix(3, &[0.9, 0.9, -0.9]).unwrap();
        assert!(matches!(
            try_cholesky(&m),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn structural_checks() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = 0.3;
        assert_eq!(try_cholesky(&m), Err(LinalgError::NotCorrelationMatrix));
        let mut m = Matrix::identity(2);
        m[(0, 0)] = 2.0;
        assert_eq!(try_cholesky(&m), Err(LinalgError::NotCorrelationMatrix));
    }

    #[test]
    fn rank1_update_of_identity() {
        let f = CholeskyFactor::identity(2);
        let u = f.rank1_modify(&[1.0, 0.0], Sign::Update).unwrap();
        assert!((u.gamma()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(u.gamma()[(1, 1)], 1.0);
        assert_eq!(u.gamma()[(0, 1)], 0.0);
        let back = u.rank1_modify(&[1.0, 0.0], Sign::Downdate).unwrap();
        assert!(back.gamma().max_abs_diff(f.gamma()) < 1e-10);
    }

    #[test]
    fn downdate_to_singular_fails() {
        let f = CholeskyFactor::identity(2);
        assert!(matches!(
            f.rank1_modify(&[1.0, 0.0], Sign::Downdate),
            Err(LinalgError::DowndateFailed { .. })
        ));
    }

    #[test]
    fn perturb_chol_examples() {
        let f = CholeskyFactor::identity(3);
        assert_eq!(perturb_offdiagonal_chol(&f, 1, 0, 0.0).unwrap(), f);
        let p = perturb_offdiagonal_chol(&f, 1, 0, 0.6).unwrap();
        let r = p.reconstruct();
        assert!((r[(1, 0)] - 0.6).abs() < 1e-14);
        assert!((r[(0, 0)] - 1.0).abs() < 1e-14);
        let n = perturb_offdiagonal_chol(&p, 1, 0, -1.1).unwrap();
        assert!((n.reconstruct()[(1, 0)] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn move_target_identity_cases() {
        let f = CholeskyFactor::identity(4);
        assert_eq!(move_target_to_last(&f, 2, 0).unwrap(), f);
        let m = assemble_matrix(3, &[0.3, -0.2, 0.4]).unwrap();
        let f = try_cholesky(&m).unwrap();
        assert_eq!(move_target_to_last(&f, 2, 1).unwrap(), f);
        assert!(move_target_to_last(&f, 1, 2).is_err());
    }

    #[test]
    fn dense_inverse_round_trip() {
        let m = assemble_matrix(3, &[0.3, -0.2, 0.4]).unwrap();
        let (inv, det) = spd_inverse_and_det(&m).unwrap();
        let prod = m.matmul(&inv);
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-14);
        let expected = 1.0 + 2.0 * 0.3 * -0.2 * 0.4 - 0.09 - 0.04 - 0.16;
        assert!((det - expected).abs() < 1e-14);
    }
}
