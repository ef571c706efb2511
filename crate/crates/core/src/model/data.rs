use serde::{Deserialize, Serialize};

use super::{ModelError, ModelSpec};
use crate::linalg::Matrix;

/// Item code for a missing response.
pub const MISSING: i8 = -1;

/// Observed data: binary items with missing values, base covariates `Z`
/// (first column the constant), the expanded covariates `X`, and the
/// per-unit nonzero flags of both class sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    items_per_unit: usize,
    items: Vec<i8>,
    z: Matrix,
    x: Matrix,
    x_mean: Matrix,
    x_corr: Matrix,
    x_class: Matrix,
    nonzero: Vec<[bool; 2]>,
}

fn select_columns(x: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(x.rows(), cols.len(), |r, c| x[(r, cols[c])])
}

impl Dataset {
    /// `items` is row-major `n × total_items` with values 0, 1 or [`MISSING`];
    /// `z` is `n × p` with the constant in column 0.
    pub fn new(spec: &ModelSpec, items: Vec<i8>, z: Matrix) -> Result<Self, ModelError> {
        let n = z.rows();
        let t = spec.total_items();
        let p = spec.base_names().len() + 1;
        if z.cols() != p {
            return Err(ModelError::Data(format!("expected {p} base covariate columns, found {}", z.cols())));
        }
        if items.len() != n * t {
            return Err(ModelError::Data(format!("expected {} item values, found {}", n * t, items.len())));
        }
        for i in 0..n {
            if z[(i, 0)] != 1.0 {
                return Err(ModelError::Data(format!("row {}: constant column must be 1", i + 1)));
            }
            for c in 1..p {
                if !z[(i, c)].is_finite() {
                    return Err(ModelError::Data(format!(
                        "row {}: covariate {:?} is missing or not finite",
                        i + 1,
                        spec.base_names()[c - 1]
                    )));
                }
            }
        }
        if let Some(pos) = items.iter().position(|&v| !(v == 0 || v == 1 || v == MISSING)) {
            return Err(ModelError::Data(format!(
                "row {}: item value {} is not 0, 1 or missing",
                pos / t.max(1) + 1,
                items[pos]
            )));
        }
        let x = spec.expansion().expand_all(&z);
        let nonzero = (0..n)
            .map(|i| {
                let row = &items[i * t..(i + 1) * t];
                let side = |s: usize| spec.side_item_ranges(s).any(|r| row[r].contains(&1));
                [side(0), side(1)]
            })
            .collect();
        Ok(Self {
            n,
            items_per_unit: t,
            items,
            x_mean: select_columns(&x, spec.mean_cov()),
            x_corr: select_columns(&x, spec.corr_cov()),
            x_class: select_columns(&x, spec.class_cov()),
            z,
            x,
            nonzero,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// All item codes of unit `i`.
    pub fn items(&self, i: usize) -> &[i8] {
        &self.items[i * self.items_per_unit..(i + 1) * self.items_per_unit]
    }

    pub fn all_items(&self) -> &[i8] {
        &self.items
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn x_mean(&self) -> &Matrix {
        &self.x_mean
    }

    pub fn x_corr(&self) -> &Matrix {
        &self.x_corr
    }

    pub fn x_class(&self) -> &Matrix {
        &self.x_class
    }

    /// `[G_i, R_i]`: whether any item on each side equals 1.
    pub fn nonzero(&self, i: usize) -> [bool; 2] {
        self.nonzero[i]
    }

    /// Rows `rows` as a new dataset (used for stacking and subsetting).
    pub fn subset(&self, spec: &ModelSpec, rows: &[usize]) -> Result<Self, ModelError> {
        let mut items = Vec::with_capacity(rows.len() * self.items_per_unit);
        let mut z = Vec::with_capacity(rows.len() * self.z.cols());
        for &r in rows {
            items.extend_from_slice(self.items(r));
            z.extend_from_slice(self.z.row(r));
        }
        Self::new(spec, items, Matrix::from_row_major(rows.len(), self.z.cols(), z))
    }
}

/// Latent classes and continuous latents for every unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    /// `[ξ_G, ξ_R]` per unit, each 0 or 1.
    pub xi: Vec<[u8; 2]>,
    /// `n × K`.
    pub eta: Matrix,
}

impl LatentState {
    /// Cell index `2 ξ_G + ξ_R` of unit `i`.
    pub fn cell(&self, i: usize) -> usize {
        2 * self.xi[i][0] as usize + self.xi[i][1] as usize
    }

    /// True when no unit has `ξ = 0` on a side with a nonzero response.
    pub fn respects_forcing(&self, data: &Dataset) -> bool {
        (0..data.n()).all(|i| {
            let nz = data.nonzero(i);
            (0..2).all(|s| !nz[s] || self.xi[i][s] == 1)
        })
    }
}
