use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::FeasibilityError;
use crate::linalg::Matrix;

/// Upper bound on enumerated box vertices.
pub const MAX_TEST_POINTS: u128 = 1 << 20;

/// One entry of the expanded covariate vector `X(Z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Copy(usize),
    Square(usize),
    Product(usize, usize),
}

/// Maps base variables `Z` (with `Z_0 = 1`) to model covariates `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateExpansion {
    base_dim: usize,
    terms: Vec<Term>,
}

impl CovariateExpansion {
    pub fn new(base_dim: usize, terms: Vec<Term>) -> Result<Self, FeasibilityError> {
        if terms.first() != Some(&Term::Copy(0)) {
            return Err(FeasibilityError::Expansion(
                "first term must be the constant copy(0)".into(),
            ));
        }
        for t in &terms {
            let bad = match *t {
                Term::Copy(i) | Term::Square(i) => i >= base_dim,
                Term::Product(i, j) => i >= base_dim || j >= base_dim,
            };
            if bad {
                return Err(FeasibilityError::Expansion(format!(
                    "term {t:?} references a variable outside 0..{base_dim}"
                )));
            }
        }
        Ok(Self { base_dim, terms })
    }

    /// `X = Z`.
    pub fn identity(base_dim: usize) -> Self {
        Self {
            base_dim,
            terms: (0..base_dim).map(Term::Copy).collect(),
        }
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn expanded_dim(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_affine(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Copy(_)))
    }

    pub fn expand(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.base_dim);
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Copy(i) => z[i],
                Term::Square(i) => z[i] * z[i],
                Term::Product(i, j) => z[i] * z[j],
            })
            .collect()
    }

    pub fn expand_all(&self, z: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..z.rows()).map(|r| self.expand(z.row(r))).collect();
        if rows.is_empty() {
            return Matrix::zeros(0, self.expanded_dim());
        }
        Matrix::from_rows(&rows)
    }
}

/// How a [`TestSet`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSetRecipe {
    ObservedDistinct,
    HyperrectangleVertices,
    QuadraticAugmented,
    /// Points supplied directly, e.g. read from CSV.
    Explicit,
}

/// Strategy for [`build_test_set`]. Bounds are `[l_s, u_s]` for the
/// non-constant base variables `Z_1..Z_{p-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSetStrategy {
    ObservedDistinct,
    Hyperrectangle { bounds: Vec<(f64, f64)> },
    QuadraticAugmented { bounds: Vec<(f64, f64)> },
}

impl TestSetStrategy {
    fn name(&self) -> &'static str {
        match self {
            Self::ObservedDistinct => "observed-distinct",
            Self::Hyperrectangle { .. } => "hyperrectangle",
            Self::QuadraticAugmented { .. } => "quadratic-augmented",
        }
    }
}

/// Finite covariate set on which positive definiteness is enforced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    points: Matrix,
    recipe: TestSetRecipe,
    source_bounds: Option<Vec<(f64, f64)>>,
}

impl TestSet {
    /// Validates the point matrix: at least one row, first column all 1,
    /// finite entries and distinct rows.
    pub fn from_points(points: Matrix, recipe: TestSetRecipe) -> Result<Self, FeasibilityError> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(FeasibilityError::InvalidTestSet("no test points".into()));
        }
        let mut seen = HashSet::new();
        for r in 0..points.rows() {
            let row = points.row(r);
            if row[0] != 1.0 {
                return Err(FeasibilityError::InvalidTestSet(format!(
                    "point {r} has first coordinate {} (must be 1)",
                    row[0]
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FeasibilityError::InvalidTestSet(format!(
                    "point {r} has a non-finite coordinate"
                )));
            }
            if !seen.insert(row_key(row)) {
                return Err(FeasibilityError::InvalidTestSet(format!(
                    "point {r} duplicates an earlier point"
                )));
            }
        }
        Ok(Self {
            points,
            recipe,
            source_bounds: None,
        })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn covariates(&self) -> usize {
        self.points.cols()
    }

    /// Keeps the listed columns (the first must be the constant) and drops
    /// duplicate rows. Projecting a set whose hull covers the data keeps
    /// that property for the projected data.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, FeasibilityError> {
        if cols.iter().any(|&c| c >= self.points.cols()) {
            return Err(FeasibilityError::Dimension(format!(
                "column selection exceeds {} test-set columns",
                self.points.cols()
            )));
        }
        let rows = (0..self.points.rows())
            .map(|r| cols.iter().map(|&c| self.points[(r, c)]).collect())
            .collect();
        let mut ts = Self::from_points(Matrix::from_rows(&dedup_rows(rows)), self.recipe)?;
        ts.source_bounds = self.source_bounds.clone();
        Ok(ts)
    }

    pub fn recipe(&self) -> TestSetRecipe {
        self.recipe
    }

    pub fn source_bounds(&self) -> Option<&[(f64, f64)]> {
        self.source_bounds.as_deref()
    }

    /// One row per point, header `x0,x1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeasibilityError> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.covariates()).map(|c| format!("x{c}")).collect();
        w.write_record(&header).map_err(csv_err)?;
        for r in 0..self.len() {
            w.write_record(self.points.row(r).iter().map(|v| format!("{v:?}")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| FeasibilityError::Csv(e.to_string()))
    }

    /// Reads points written by [`TestSet::write_csv`] (any header names).
    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeasibilityError> {
        let mut rd = csv::Reader::from_reader(input);
        let width = rd.headers().map_err(csv_err)?.len();
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    s.trim().parse::<f64>().map_err(|_| {
                        FeasibilityError::Csv(format!("row {}, column {}: not a number: {s:?}", i + 1, c + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != width {
                return Err(FeasibilityError::Csv(format!("row {} has {} fields", i + 1, row.len())));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(FeasibilityError::InvalidTestSet("no test points".into()));
        }
        Self::from_points(Matrix::from_rows(&rows), TestSetRecipe::Explicit)
    }
}

fn csv_err(e: csv::Error) -> FeasibilityError {
    FeasibilityError::Csv(e.to_string())
}

fn row_key(row: &[f64]) -> Vec<u64> {
    // + 0.0 folds -0.0 into 0.0
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn dedup_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut seen = HashSet::new();
    rows.into_iter().filter(|r| seen.insert(row_key(r))).collect()
}

/// Builds the test set for `expansion` from base data `z_data` (`N × p`,
/// first column all 1) according to `strategy`.
pub fn build_test_set(
    expansion: &CovariateExpansion,
    z_data: &Matrix,
    strategy: &TestSetStrategy,
) -> Result<TestSet, FeasibilityError> {
    let p = expansion.base_dim();
    let reject = |reason: String| FeasibilityError::Strategy {
        strategy: strategy.name().into(),
        reason,
    };
    let has_product = expansion.terms().iter().any(|t| matches!(t, Term::Product(..)));

    let (rows, recipe, bounds) = match strategy {
        TestSetStrategy::ObservedDistinct => {
            if z_data.cols() != p {
                return Err(FeasibilityError::Dimension(format!(
                    "data has {} base variables, expansion expects {p}",
                    z_data.cols()
                )));
            }
            if let Some(r) = (0..z_data.rows()).find(|&r| z_data[(r, 0)] != 1.0) {
                return Err(FeasibilityError::InvalidTestSet(format!(
                    "row {r} of the base data has a non-unit constant"
                )));
            }
            let rows = (0..z_data.rows()).map(|r| expansion.expand(z_data.row(r))).collect();
            (rows, TestSetRecipe::ObservedDistinct, None)
        }
        TestSetStrategy::Hyperrectangle { bounds } => {
            if !expansion.is_affine() {
                return Err(reject("expansion has square or product terms".into()));
            }
            check_bounds(bounds, p)?;
            let per_var: Vec<Vec<(f64, f64)>> =
                bounds.iter().map(|&(l, u)| vec![(l, l * l), (u, u * u)]).collect();
            let rows = box_points(expansion, &per_var)?;
            (rows, TestSetRecipe::HyperrectangleVertices, Some(bounds.clone()))
        }
        TestSetStrategy::QuadraticAugmented { bounds } => {
            if has_product {
                return Err(reject(
                    "product terms are only supported with the observed-distinct strategy".into(),
                ));
            }
            check_bounds(bounds, p)?;
            let squared: HashSet<usize> = expansion
                .terms()
                .iter()
                .filter_map(|t| match *t {
                    Term::Square(i) => Some(i),
                    _ => None,
                })
                .collect();
            if squared.contains(&0) {
                return Err(reject("square of the constant term".into()));
            }
            let per_var: Vec<Vec<(f64, f64)>> = bounds
                .iter()
                .enumerate()
                .map(|(s, &(l, u))| {
                    if squared.contains(&(s + 1)) {
                        // tangents to z² at l and u meet at ((l+u)/2, l·u)
                        vec![(l, l * l), (u, u * u), ((l + u) / 2.0, l * u)]
                    } else {
                        vec![(l, l * l), (u, u * u)]
                    }
                })
                .collect();
            let rows = box_points(expansion, &per_var)?;
            (rows, TestSetRecipe::QuadraticAugmented, Some(bounds.clone()))
        }
    };

    let rows = dedup_rows(rows);
    if rows.is_empty() {
        return Err(FeasibilityError::InvalidTestSet("no test points".into()));
    }
    let mut ts = TestSet::from_points(Matrix::from_rows(&rows), recipe)?;
    ts.source_bounds = bounds;
    Ok(ts)
}

fn check_bounds(bounds: &[(f64, f64)], p: usize) -> Result<(), FeasibilityError> {
    if bounds.len() + 1 != p {
        return Err(FeasibilityError::Dimension(format!(
            "{} bounds given for {} non-constant base variables",
            bounds.len(),
            p - 1
        )));
    }
    for (s, &(l, u)) in bounds.iter().enumerate() {
        if !(l.is_finite() && u.is_finite() && l <= u) {
            return Err(FeasibilityError::InvalidTestSet(format!(
                "bounds for variable {} are not a finite interval: [{l}, {u}]",
                s + 1
            )));
        }
    }
    Ok(())
}

/// Cartesian product of per-variable `(z, z²-substitute)` candidates mapped
/// through the expansion.
fn box_points(
    expansion: &CovariateExpansion,
    per_var: &[Vec<(f64, f64)>],
) -> Result<Vec<Vec<f64>>, FeasibilityError> {
    let total = per_var
        .iter()
        .try_fold(1u128, |acc, v| acc.checked_mul(v.len() as u128))
        .unwrap_or(u128::MAX);
    if total > MAX_TEST_POINTS {
        return Err(FeasibilityError::TooManyVertices(total));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; per_var.len()];
    loop {
        let pick = |s: usize| -> (f64, f64) {
            if s == 0 {
                (1.0, 1.0)
            } else {
                per_var[s - 1][idx[s - 1]]
            }
        };
        out.push(
            expansion
                .terms()
                .iter()
                .map(|t| match *t {
                    Term::Copy(i) => pick(i).0,
                    Term::Square(i) => pick(i).1,
                    Term::Product(i, j) => pick(i).0 * pick(j).0,
                })
                .collect(),
        );
        let mut s = 0;
        loop {
            if s == idx.len() {
                return Ok(out);
            }
            idx[s] += 1;
            if idx[s] < per_var[s].len() {
                break;
            }
            idx[s] = 0;
            s += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observed_distinct_dedups() {
        let z = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0]]);
        let ts = build_test_set(&CovariateExpansion::identity(2), &z, &TestSetStrategy::ObservedDistinct)
            .unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.recipe(), TestSetRecipe::ObservedDistinct);
    }

    #[test]
    fn quadratic_augmentation_point() {
        let e = CovariateExpansion::new(2, vec![Term::Copy(0), Term::Copy(1), Term::Square(1)]).unwrap();
        let ts = build_test_set(
            &e,
            &Matrix::zeros(0, 2),
            &TestSetStrategy::QuadraticAugmented {
                bounds: vec![(-1.0, 1.0)],
            },
        )
        .unwrap();
        let pts = ts.points();
        assert_eq!(pts.rows(), 3);
        assert_eq!(pts.row(2), &[1.0, 0.0, -1.0]);
        assert_eq!(pts.row(0), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn hyperrectangle_vertices() {
        let ts = build_test_set(
            &CovariateExpansion::identity(2),
            &Matrix::zeros(0, 2),
            &TestSetStrategy::Hyperrectangle {
                bounds: vec![(2.0, 4.0)],
            },
        )
        .unwrap();
        assert_eq!(ts.points().as_slice(), &[1.0, 2.0, 1.0, 4.0]);
        assert_eq!(ts.source_bounds(), Some(&[(2.0, 4.0)][..]));
    }

    #[test]
    fn hyperrectangle_rejects_nonaffine() {
        let e = CovariateExpansion::new(2, vec![Term::Copy(0), Term::Square(1)]).unwrap();
        let err = build_test_set(
            &e,
            &Matrix::zeros(0, 2),
            &TestSetStrategy::Hyperrectangle {
                bounds: vec![(0.0, 1.0)],
            },
        );
        assert!(matches!(err, Err(FeasibilityError::Strategy { .. })));
    }

    #[test]
    fn products_need_observed_points() {
        let e = CovariateExpansion::new(3, vec![Term::Copy(0), Term::Product(1, 2)]).unwrap();
        let err = build_test_set(
            &e,
            &Matrix::zeros(0, 3),
            &TestSetStrategy::QuadraticAugmented {
                bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            },
        );
        assert!(matches!(err, Err(FeasibilityError::Strategy { .. })));
    }

    #[test]
    fn vertex_cap() {
        let e = CovariateExpansion::identity(22);
        let err = build_test_set(
            &e,
            &Matrix::zeros(0, 22),
            &TestSetStrategy::Hyperrectangle {
                bounds: vec![(0.0, 1.0); 21],
            },
        );
        assert!(matches!(err, Err(FeasibilityError::TooManyVertices(_))));
    }

    #[test]
    fn expansion_validation() {
        assert!(CovariateExpansion::new(2, vec![Term::Copy(1)]).is_err());
        assert!(CovariateExpansion::new(2, vec![Term::Copy(0), Term::Square(2)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ts = TestSet::from_points(
            Matrix::from_rows(&[vec![1.0, 0.1], vec![1.0, -3.25]]),
            TestSetRecipe::ObservedDistinct,
        )
        .unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let back = TestSet::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points(), ts.points());
    }

    #[test]
    fn from_points_rejects_duplicates_and_missing_constant() {
        let dup = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, -0.0]]);
        assert!(TestSet::from_points(dup, TestSetRecipe::Explicit).is_err());
        let nc = Matrix::from_rows(&[vec![2.0, 0.0]]);
        assert!(TestSet::from_points(nc, TestSetRecipe::Explicit).is_err());
    }
}
