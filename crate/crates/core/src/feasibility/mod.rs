//! Positive-definiteness constraints on the linear correlation model
//! `ρ(X) = αᵀX`.
//!
//! A coefficient matrix `α` is feasible on a finite test set when `R(αᵀX_j)` is
//! positive definite at every test point. Feasibility on the test set carries
//! over to its convex hull, and the feasible set of `α` is convex, so every
//! convex combination of retained draws (posterior means, quantiles) is
//! feasible too. Single coefficients are updated inside the open interval
//! computed by [`alpha_interval`].

mod test_set;

pub use test_set::{
    build_test_set, CovariateExpansion, TestSet, TestSetRecipe, TestSetStrategy, Term,
    MAX_TEST_POINTS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    assemble_matrix, move_target_to_last, pair_count, try_cholesky, CholeskyFactor,
    CorrelationVector, LinalgError, Matrix, PairLayout,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("quadratic has non-negative leading coefficient {c} or negative discriminant {disc}")]
    NotConcave { c: f64, disc: f64 },
    #[error("negative radicand {0:e} in Cholesky interval; factor is numerically broken")]
    NegativeRadicand(f64),
    #[error("feasible interval ({lo}, {hi}) does not contain the current value {current}")]
    EmptyInterval { lo: f64, hi: f64, current: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid covariate expansion: {0}")]
    Expansion(String),
    #[error("test-set strategy {strategy} cannot be used: {reason}")]
    Strategy { strategy: String, reason: String },
    #[error("vertex enumeration would produce {0} points; use the observed-distinct strategy")]
    TooManyVertices(u128),
    #[error("invalid test set: {0}")]
    InvalidTestSet(String),
    #[error("test-set CSV error: {0}")]
    Csv(String),
}

/// Coefficients of the correlation model; row `l` holds `α_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMatrix {
    dim: usize,
    coeffs: Matrix,
}

impl AlphaMatrix {
    pub fn new(dim: usize, coeffs: Matrix) -> Result<Self, FeasibilityError> {
        if coeffs.rows() != pair_count(dim) {
            return Err(FeasibilityError::Dimension(format!(
                "alpha has {} rows, expected {} for dimension {dim}",
                coeffs.rows(),
                pair_count(dim)
            )));
        }
        Ok(Self { dim, coeffs })
    }

    pub fn zeros(dim: usize, q: usize) -> Self {
        Self {
            dim,
            coeffs: Matrix::zeros(pair_count(dim), q),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn covariates(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn get(&self, l: usize, m: usize) -> f64 {
        self.coeffs[(l, m)]
    }

    pub fn set(&mut self, l: usize, m: usize, value: f64) {
        self.coeffs[(l, m)] = value;
    }

    /// `ρ = αᵀx`.
    pub fn correlations_at(&self, x: &[f64]) -> CorrelationVector {
        let rho = self.coeffs.mat_vec(x);
        CorrelationVector::new(self.dim, rho).expect("row count checked at construction")
    }

    /// Elementwise `λ·self + (1-λ)·other`.
    pub fn convex_combination(&self, other: &AlphaMatrix, lambda: f64) -> AlphaMatrix {
        let coeffs = Matrix::from_fn(self.pairs(), self.covariates(), |r, c| {
            lambda * self.coeffs[(r, c)] + (1.0 - lambda) * other.coeffs[(r, c)]
        });
        AlphaMatrix {
            dim: self.dim,
            coeffs,
        }
    }
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FeasibleInterval {
    pub const UNBOUNDED: Self = Self {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Strict containment; endpoints themselves are infeasible.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Coefficients `(c, d, e)` of the determinant quadratic
/// `f(ρ') = c ρ'² + d ρ' + e` from its values at -1, 0, 1.
pub fn quadratic_from_three_points(f_neg1: f64, f_0: f64, f_1: f64) -> (f64, f64, f64) {
    let c = (f_1 + f_neg1 - 2.0 * f_0) / 2.0;
    let d = (f_1 - f_neg1) / 2.0;
    (c, d, f_0)
}

/// Centre `g` and half-width `h` of the positive region of `c ρ² + d ρ + e`.
pub fn rho_roots(c: f64, d: f64, e: f64) -> Result<(f64, f64), FeasibilityError> {
    let disc = d * d - 4.0 * c * e;
    if !(c < 0.0) || disc < 0.0 {
        return Err(FeasibilityError::NotConcave { c, disc });
    }
    let g = -d / (2.0 * c);
    let h = (disc / (4.0 * c * c)).sqrt();
    Ok((g, h))
}

/// `(g, h)` for correlation `l` of `rho` by evaluating three determinants.
pub fn rho_interval_by_determinants(
    rho: &CorrelationVector,
    l: usize,
) -> Result<(f64, f64), FeasibilityError> {
    let dim = rho.dim();
    let mut vals = rho.values().to_vec();
    let mut f = |v: f64| -> Result<f64, FeasibilityError> {
        vals[l] = v;
        Ok(assemble_matrix(dim, &vals)?.determinant())
    };
    let (fm, f0, fp) = (f(-1.0)?, f(0.0)?, f(1.0)?);
    let (c, d, e) = quadratic_from_three_points(fm, f0, fp);
    rho_roots(c, d, e)
}

/// `(g, h)` read off a factor whose target correlation sits at `(K-1, K-2)`.
pub fn rho_interval_from_cholesky(gamma_tilde: &CholeskyFactor) -> Result<(f64, f64), FeasibilityError> {
    let g = gamma_tilde.gamma();
    gh_from_upper(g.as_slice(), gamma_tilde.dim())
}

/// Slice form of [`rho_interval_from_cholesky`].
pub fn gh_from_upper(g: &[f64], k: usize) -> Result<(f64, f64), FeasibilityError> {
    let (a, b) = (k - 2, k - 1);
    let mut centre = 0.0;
    let mut ss = 0.0;
    for p in 0..a {
        centre += g[p * k + a] * g[p * k + b];
        ss += g[p * k + b] * g[p * k + b];
    }
    let radicand = 1.0 - ss;
    if radicand < 0.0 {
        return Err(FeasibilityError::NegativeRadicand(radicand));
    }
    Ok((centre, g[a * k + a] * radicand.sqrt()))
}

/// `(g, h)` for the correlation at `(k1, k2)` of the factored matrix.
pub fn rho_interval(gamma: &CholeskyFactor, k1: usize, k2: usize) -> Result<(f64, f64), FeasibilityError> {
    let (hi, lo) = if k1 > k2 { (k1, k2) } else { (k2, k1) };
    rho_interval_from_cholesky(&move_target_to_last(gamma, hi, lo)?)
}

/// Feasible interval for the single coefficient `α_lm`, with `factors[j]` the
/// Cholesky factor of `R(αᵀX_j)` for every test point.
pub fn alpha_interval(
    alpha: &AlphaMatrix,
    l: usize,
    m: usize,
    test_points: &TestSet,
    factors: &[CholeskyFactor],
) -> Result<FeasibleInterval, FeasibilityError> {
    let points = test_points.points();
    if factors.len() != points.rows() {
        return Err(FeasibilityError::Dimension(format!(
            "{} factors for {} test points",
            factors.len(),
            points.rows()
        )));
    }
    if points.cols() != alpha.covariates() {
        return Err(FeasibilityError::Dimension(format!(
            "test points have {} covariates, alpha has {}",
            points.cols(),
            alpha.covariates()
        )));
    }
    let layout = PairLayout::new(alpha.dim());
    let (k1, k2) = layout.position(l);
    let mut gh = Vec::with_capacity(factors.len());
    for (j, f) in factors.iter().enumerate() {
        if points[(j, m)] == 0.0 {
            gh.push((0.0, 0.0));
        } else {
            gh.push(rho_interval(f, k1, k2)?);
        }
    }
    interval_from_gh(alpha.coeffs().row(l), m, points, &gh)
}

/// Intersects the per-test-point intervals for `α_lm`, given the row
/// `alpha_row = α_l` and precomputed `(g_jl, h_jl)` for each test point.
pub fn interval_from_gh(
    alpha_row: &[f64],
    m: usize,
    points: &Matrix,
    gh: &[(f64, f64)],
) -> Result<FeasibleInterval, FeasibilityError> {
    let mut out = FeasibleInterval::UNBOUNDED;
    for (j, &(g, h)) in gh.iter().enumerate() {
        let x = points.row(j);
        let xm = x[m];
        if xm == 0.0 {
            continue;
        }
        let rest: f64 = alpha_row
            .iter()
            .zip(x)
            .enumerate()
            .filter(|&(k, _)| k != m)
            .map(|(_, (a, xk))| a * xk)
            .sum();
        let base = g - rest;
        let (p, q) = ((base - h) / xm, (base + h) / xm);
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        out.lo = out.lo.max(lo);
        out.hi = out.hi.min(hi);
    }
    let current = alpha_row[m];
    if !out.contains(current) {
        return Err(FeasibilityError::EmptyInterval {
            lo: out.lo,
            hi: out.hi,
            current,
        });
    }
    Ok(out)
}

/// True iff `R(αᵀX_j)` passes the Cholesky test at every test point.
pub fn is_feasible(alpha: &AlphaMatrix, test_points: &TestSet) -> bool {
    infeasible_points(alpha, test_points).is_empty()
}

/// Indices of test points where `R(αᵀX_j)` is not positive definite.
pub fn infeasible_points(alpha: &AlphaMatrix, test_points: &TestSet) -> Vec<usize> {
    let points = test_points.points();
    assert_eq!(points.cols(), alpha.covariates(), "covariate count mismatch");
    (0..points.rows())
        .filter(|&j| {
            let rho = alpha.correlations_at(points.row(j));
            try_cholesky(&rho.assemble()).is_err()
        })
        .collect()
}

/// Cholesky factors of `R(αᵀX_j)` for every test point.
pub fn test_point_factors(
    alpha: &AlphaMatrix,
    test_points: &TestSet,
) -> Result<Vec<CholeskyFactor>, FeasibilityError> {
    let points = test_points.points();
    (0..points.rows())
        .map(|j| Ok(try_cholesky(&alpha.correlations_at(points.row(j)).assemble())?))
        .collect()
}
