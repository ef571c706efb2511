use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ModelError, ModelSpec, Scale, CELL_NAMES};
use crate::feasibility::AlphaMatrix;
use crate::linalg::Matrix;

/// Intercepts and loadings of one item block. Entry 0 is the reference item
/// with `tau = 0` and `lambda = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ItemParams {
    /// Reference-only block: every item at `tau = 0`, `lambda = 1`.
    pub fn reference(items: usize) -> Self {
        Self {
            tau: vec![0.0; items],
            lambda: vec![1.0; items],
        }
    }
}

/// Measurement parameters keyed by dimension name. Single-item dims carry
/// none: their item is `1(η > 0)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementParams {
    pub dims: BTreeMap<String, ItemParams>,
}

impl MeasurementParams {
    /// Checks names, lengths and the identification constants and returns the
    /// blocks in dimension order. Single-item dims get the reference block.
    pub fn per_dim(&self, spec: &ModelSpec) -> Result<Vec<ItemParams>, ModelError> {
        for name in self.dims.keys() {
            match spec.dims().iter().find(|d| &d.name == name) {
                None => return Err(ModelError::Params(format!("measurement block for unknown dimension {name:?}"))),
                Some(d) if !d.is_multi_item() => {
                    return Err(ModelError::Params(format!(
                        "dimension {name:?} has a single item and takes no measurement parameters"
                    )))
                }
                _ => {}
            }
        }
        let mut out = Vec::with_capacity(spec.k());
        for d in spec.dims() {
            if !d.is_multi_item() {
                out.push(ItemParams::reference(1));
                continue;
            }
            let p = self
                .dims
                .get(&d.name)
                .ok_or_else(|| ModelError::Params(format!("no measurement parameters for {:?}", d.name)))?;
            if p.tau.len() != d.items || p.lambda.len() != d.items {
                return Err(ModelError::Params(format!(
                    "{:?} needs {} intercepts and loadings",
                    d.name, d.items
                )));
            }
            if p.tau[0] != 0.0 || p.lambda[0] != 1.0 {
                return Err(ModelError::Params(format!(
                    "first item of {:?} must have intercept 0 and loading 1",
                    d.name
                )));
            }
            if p.tau.iter().chain(&p.lambda).any(|v| !v.is_finite()) {
                return Err(ModelError::Params(format!("non-finite measurement parameter in {:?}", d.name)));
            }
            out.push(p.clone());
        }
        Ok(out)
    }
}

/// Structural coefficients: `beta` is `Q_m × K`, `sigma` has one entry per dim
/// (1 for fixed dims), `alpha` is `L × q`, and `gamma` holds the class
/// coefficients of cells 01, 10, 11 as rows (cell 00 is the reference).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub beta: Matrix,
    pub sigma: Vec<f64>,
    pub alpha: AlphaMatrix,
    pub gamma: Matrix,
}

impl StructuralParams {
    /// `α = β = γ = 0`, `σ = 1`.
    pub fn initial(spec: &ModelSpec) -> Self {
        Self {
            beta: Matrix::zeros(spec.mean_cov().len(), spec.k()),
            sigma: vec![1.0; spec.k()],
            alpha: AlphaMatrix::zeros(spec.k(), spec.corr_cov().len()),
            gamma: Matrix::zeros(3, spec.class_cov().len()),
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<(), ModelError> {
        let (k, qm, q, qc) = (spec.k(), spec.mean_cov().len(), spec.corr_cov().len(), spec.class_cov().len());
        if self.beta.rows() != qm || self.beta.cols() != k {
            return Err(ModelError::Params(format!("beta must be {qm} x {k}")));
        }
        if self.sigma.len() != k {
            return Err(ModelError::Params(format!("sigma must have {k} entries")));
        }
        if self.alpha.dim() != k || self.alpha.covariates() != q {
            return Err(ModelError::Params(format!("alpha must be {} x {q}", spec.pairs())));
        }
        if self.gamma.rows() != 3 || self.gamma.cols() != qc {
            return Err(ModelError::Params(format!("gamma must be 3 x {qc}")));
        }
        for (d, dim) in spec.dims().iter().enumerate() {
            let s = self.sigma[d];
            if !(s > 0.0 && s.is_finite()) {
                return Err(ModelError::Params(format!("sigma for {:?} must be positive", dim.name)));
            }
            if dim.scale() == Scale::Fixed && s != 1.0 {
                return Err(ModelError::Params(format!("sigma for {:?} is fixed at 1", dim.name)));
            }
        }
        for l in 0..spec.pairs() {
            for m in 0..q {
                if !spec.is_alpha_free(l, m) && self.alpha.get(l, m) != 0.0 {
                    return Err(ModelError::Params(format!(
                        "alpha for {} on {:?} is fixed at zero",
                        spec.pair_name(l),
                        spec.covariate_names()[spec.corr_cov()[m]]
                    )));
                }
            }
        }
        let all = self
            .beta
            .as_slice()
            .iter()
            .chain(self.alpha.coeffs().as_slice())
            .chain(self.gamma.as_slice());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Params("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Column names of the flattened parameter vector, in [`Self::flatten`] order.
    pub fn names(spec: &ModelSpec) -> Vec<String> {
        let cov = spec.covariate_names();
        let mut out = Vec::new();
        for dim in spec.dims() {
            for &c in spec.mean_cov() {
                out.push(format!("beta.{}.{}", dim.name, cov[c]));
            }
        }
        for d in spec.free_scale_dims() {
            out.push(format!("sigma.{}", spec.dims()[d].name));
        }
        for l in 0..spec.pairs() {
            let pair = spec.pair_name(l);
            for &c in spec.corr_cov() {
                out.push(format!("alpha.{pair}.{}", cov[c]));
            }
        }
        for cell in &CELL_NAMES[1..] {
            for &c in spec.class_cov() {
                out.push(format!("gamma.{cell}.{}", cov[c]));
            }
        }
        out
    }

    pub fn flatten(&self, spec: &ModelSpec) -> Vec<f64> {
        let mut out = Vec::new();
        for d in 0..spec.k() {
            for r in 0..self.beta.rows() {
                out.push(self.beta[(r, d)]);
            }
        }
        for d in spec.free_scale_dims() {
            out.push(self.sigma[d]);
        }
        out.extend_from_slice(self.alpha.coeffs().as_slice());
        out.extend_from_slice(self.gamma.as_slice());
        out
    }

    pub fn unflatten(spec: &ModelSpec, values: &[f64]) -> Result<Self, ModelError> {
        let expected = Self::names(spec).len();
        if values.len() != expected {
            return Err(ModelError::Params(format!("expected {expected} values, found {}", values.len())));
        }
        let mut p = Self::initial(spec);
        let mut it = values.iter().copied();
        for d in 0..spec.k() {
            for r in 0..p.beta.rows() {
                p.beta[(r, d)] = it.next().unwrap();
            }
        }
        for d in spec.free_scale_dims().collect::<Vec<_>>() {
            p.sigma[d] = it.next().unwrap();
        }
        let q = spec.corr_cov().len();
        for l in 0..spec.pairs() {
            for m in 0..q {
                p.alpha.set(l, m, it.next().unwrap());
            }
        }
        for v in p.gamma.as_mut_slice() {
            *v = it.next().unwrap();
        }
        Ok(p)
    }
}
