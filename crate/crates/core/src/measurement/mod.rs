//! First-step marginal maximum likelihood for the item parameters of one
//! class side: a zero-inflated probit measurement model integrated over the
//! latent block by Gauss–Hermite quadrature, maximized by BFGS in an
//! unconstrained parametrization.

mod optim;

pub use optim::{bfgs_maximize, numeric_gradient, numeric_hessian, BfgsOptions, BfgsResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::symmetric_eigenvalues;
use crate::model::{Dataset, ItemParams, ModelSpec, MISSING};
use crate::special::{log_norm_cdf, GaussHermite};

/// Smallest accepted number of quadrature nodes.
pub const MIN_NODES: usize = 8;
/// Condition numbers above this flag the fit as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e8;

const UNITS_PER_TASK: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasurementError {
    #[error("side {0} is not supported: {1}")]
    UnsupportedSide(String, String),
    #[error("invalid first-step input: {0}")]
    Invalid(String),
}

/// Responses of one side: a multi-item block and an optional single item.
#[derive(Clone, Debug, PartialEq)]
pub struct SideData {
    block_items: usize,
    block: Vec<i8>,
    single: Option<Vec<i8>>,
}

impl SideData {
    /// `block` is row-major `n × block_items`.
    pub fn new(block_items: usize, block: Vec<i8>, single: Option<Vec<i8>>) -> Result<Self, MeasurementError> {
        if block_items < 2 {
            return Err(MeasurementError::Invalid("the block needs at least two items".into()));
        }
        if block.len() % block_items != 0 {
            return Err(MeasurementError::Invalid("block length is not a multiple of the item count".into()));
        }
        let n = block.len() / block_items;
        if let Some(s) = &single {
            if s.len() != n {
                return Err(MeasurementError::Invalid("single-item column has the wrong length".into()));
            }
        }
        let ok = |v: &i8| matches!(*v, 0 | 1 | MISSING);
        if !block.iter().all(ok) || !single.iter().flatten().all(ok) {
            return Err(MeasurementError::Invalid("responses must be 0, 1 or missing".into()));
        }
        Ok(Self {
            block_items,
            block,
            single,
        })
    }

    /// Extracts side `side` of a dataset. The side must hold exactly one
    /// multi-item dim and at most one single-item dim.
    pub fn from_dataset(spec: &ModelSpec, data: &Dataset, side: usize) -> Result<Self, MeasurementError> {
        let name = spec.side_name(side).to_string();
        let dims = spec.side_dims(side);
        let multi: Vec<usize> = dims.iter().copied().filter(|&d| spec.dims()[d].is_multi_item()).collect();
        let single: Vec<usize> = dims.iter().copied().filter(|&d| !spec.dims()[d].is_multi_item()).collect();
        if multi.len() != 1 || single.len() > 1 {
            return Err(MeasurementError::UnsupportedSide(
                name,
                "expected one multi-item dim and at most one single-item dim".into(),
            ));
        }
        let d = multi[0];
        let (off, j) = (spec.item_offset(d), spec.dims()[d].items);
        let block = (0..data.n()).flat_map(|i| data.items(i)[off..off + j].to_vec()).collect();
        let single = single
            .first()
            .map(|&s| (0..data.n()).map(|i| data.items(i)[spec.item_offset(s)]).collect());
        Self::new(j, block, single)
    }

    pub fn n(&self) -> usize {
        self.block.len() / self.block_items
    }

    pub fn block_items(&self) -> usize {
        self.block_items
    }

    pub fn has_single(&self) -> bool {
        self.single.is_some()
    }

    /// Any observed positive response on the side.
    pub fn nonzero(&self, i: usize) -> bool {
        let j = self.block_items;
        self.block[i * j..(i + 1) * j].contains(&1) || self.single.as_ref().is_some_and(|s| s[i] == 1)
    }

    /// Two copies of the data stacked.
    pub fn stacked_twice(&self) -> Self {
        let mut block = self.block.clone();
        block.extend_from_slice(&self.block);
        let single = self.single.as_ref().map(|s| [s.as_slice(), s.as_slice()].concat());
        Self {
            block_items: self.block_items,
            block,
            single,
        }
    }
}

/// Parameters of the first-step model. `mu_f` and `rho` are unused without a
/// single item; the latent scale of the single item is fixed at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step1Params {
    pub phi: ItemParams,
    pub pi: f64,
    pub mu_p: f64,
    pub mu_f: f64,
    pub sigma2_p: f64,
    pub rho: f64,
}

impl Step1Params {
    pub fn initial(block_items: usize) -> Self {
        Self {
            phi: ItemParams::reference(block_items),
            pi: 0.8,
            mu_p: 0.0,
            mu_f: 0.0,
            sigma2_p: 1.0,
            rho: 0.0,
        }
    }

    fn validate(&self, side: &SideData) -> Result<(), MeasurementError> {
        let j = side.block_items;
        if self.phi.tau.len() != j || self.phi.lambda.len() != j {
            return Err(MeasurementError::Invalid(format!("expected {j} item parameters")));
        }
        if self.phi.tau[0] != 0.0 || self.phi.lambda[0] != 1.0 {
            return Err(MeasurementError::Invalid("the first item must have tau 0 and lambda 1".into()));
        }
        let finite = self.phi.tau.iter().chain(&self.phi.lambda).all(|v| v.is_finite())
            && self.mu_p.is_finite()
            && self.mu_f.is_finite();
        if !finite || !(self.pi > 0.0 && self.pi < 1.0) || !(self.sigma2_p > 0.0) || !(self.rho.abs() < 1.0) {
            return Err(MeasurementError::Invalid("parameters outside their domain".into()));
        }
        Ok(())
    }

    /// Unconstrained coordinates: free τ, free λ, logit π, μ_P, log σ²_P,
    /// then μ_F and atanh ρ when the side has a single item.
    pub fn to_unconstrained(&self, single: bool) -> Vec<f64> {
        let mut v: Vec<f64> = self.phi.tau[1..].to_vec();
        v.extend_from_slice(&self.phi.lambda[1..]);
        v.push((self.pi / (1.0 - self.pi)).ln());
        v.push(self.mu_p);
        v.push(self.sigma2_p.ln());
        if single {
            v.push(self.mu_f);
            v.push(self.rho.atanh());
        }
        v
    }

    pub fn from_unconstrained(v: &[f64], block_items: usize, single: bool) -> Self {
        let f = block_items - 1;
        let mut tau = vec![0.0];
        tau.extend_from_slice(&v[..f]);
        let mut lambda = vec![1.0];
        lambda.extend_from_slice(&v[f..2 * f]);
        let r = &v[2 * f..];
        Self {
            phi: ItemParams { tau, lambda },
            pi: 1.0 / (1.0 + (-r[0]).exp()),
            mu_p: r[1],
            sigma2_p: r[2].exp(),
            mu_f: if single { r[3] } else { 0.0 },
            rho: if single { r[4].tanh() } else { 0.0 },
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Marginal log-likelihood of the side. The block latent is integrated with
/// `nodes` Gauss–Hermite points; the single item given the block latent is
/// a probit in closed form.
pub fn step1_loglik(params: &Step1Params, side: &SideData, nodes: usize) -> Result<f64, MeasurementError> {
    if nodes < MIN_NODES {
        return Err(MeasurementError::Invalid(format!("need at least {MIN_NODES} quadrature nodes")));
    }
    params.validate(side)?;
    Ok(loglik_unchecked(params, side, &GaussHermite::new(nodes)))
}

fn loglik_unchecked(p: &Step1Params, side: &SideData, gh: &GaussHermite) -> f64 {
    let j = side.block_items;
    let m = gh.len();
    let sd = p.sigma2_p.sqrt();
    // per node: ln P(y=1 | η), ln P(y=0 | η) for every item, then the single item
    let mut table = vec![0.0; m * (2 * j + 2)];
    for (k, &x) in gh.nodes.iter().enumerate() {
        let eta = p.mu_p + sd * x;
        let row = &mut table[k * (2 * j + 2)..(k + 1) * (2 * j + 2)];
        for it in 0..j {
            let lin = p.phi.tau[it] + p.phi.lambda[it] * eta;
            row[2 * it] = log_norm_cdf(lin);
            row[2 * it + 1] = log_norm_cdf(-lin);
        }
        if side.single.is_some() {
            let cm = (p.mu_f + p.rho * x) / (1.0 - p.rho * p.rho).sqrt();
            row[2 * j] = log_norm_cdf(cm);
            row[2 * j + 1] = log_norm_cdf(-cm);
        }
    }
    let log_pi = p.pi.ln();
    let log_off = (1.0 - p.pi).ln();
    let n = side.n();
    let unit = |i: usize| -> f64 {
        let ys = &side.block[i * j..(i + 1) * j];
        let yf = side.single.as_ref().map_or(MISSING, |s| s[i]);
        let mut top = f64::NEG_INFINITY;
        let mut terms = [0.0f64; 128];
        let mut big = Vec::new();
        let buf: &mut [f64] = if m <= 128 {
            &mut terms[..m]
        } else {
            big.resize(m, 0.0);
            &mut big
        };
        for (k, t) in buf.iter_mut().enumerate() {
            let row = &table[k * (2 * j + 2)..];
            let mut s = gh.log_weights[k];
            for (it, &y) in ys.iter().enumerate() {
                match y {
                    1 => s += row[2 * it],
                    0 => s += row[2 * it + 1],
                    _ => {}
                }
            }
            match yf {
                1 => s += row[2 * j],
                0 => s += row[2 * j + 1],
                _ => {}
            }
            *t = s;
            top = top.max(s);
        }
        let on = log_pi + top + buf.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
        if side.nonzero(i) {
            on
        } else {
            log_add(on, log_off)
        }
    };
    let starts: Vec<usize> = (0..n).step_by(UNITS_PER_TASK).collect();
    let partial: Vec<f64> = starts
        .par_iter()
        .map(|&s| (s..(s + UNITS_PER_TASK).min(n)).map(unit).sum())
        .collect();
    partial.iter().sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    /// ∞-norm of the numeric gradient in unconstrained coordinates.
    pub gradient_norm: f64,
    /// Condition number of the observed information (unconstrained).
    pub condition_number: f64,
    pub ill_conditioned: bool,
    /// Negative definite finite-difference Hessian at the optimum.
    pub hessian_negative_definite: bool,
}

/// Maximizes [`step1_loglik`] from `init` (or [`Step1Params::initial`]).
/// Returns the best point found even without convergence.
pub fn fit_measurement(
    side: &SideData,
    init: Option<&Step1Params>,
    nodes: usize,
    tol: f64,
) -> Result<(Step1Params, FitReport), MeasurementError> {
    if nodes < MIN_NODES {
        return Err(MeasurementError::Invalid(format!("need at least {MIN_NODES} quadrature nodes")));
    }
    if !(0..side.n()).any(|i| side.nonzero(i)) {
        return Err(MeasurementError::Invalid("no unit has a positive response on this side".into()));
    }
    let start = init.cloned().unwrap_or_else(|| Step1Params::initial(side.block_items));
    start.validate(side)?;
    let (j, single) = (side.block_items, side.has_single());
    let gh = GaussHermite::new(nodes);
    let f = |v: &[f64]| loglik_unchecked(&Step1Params::from_unconstrained(v, j, single), side, &gh);
    let res = bfgs_maximize(
        &f,
        start.to_unconstrained(single),
        &BfgsOptions {
            tol,
            ..Default::default()
        },
    );
    let h = numeric_hessian(&f, &res.x);
    let dim = res.x.len();
    let ev = symmetric_eigenvalues(&h, dim);
    let negdef = ev.iter().all(|&e| e < 0.0);
    let cond = if negdef {
        ev[0] / ev[dim - 1]
    } else {
        f64::INFINITY
    };
    let report = FitReport {
        converged: res.converged,
        iterations: res.iterations,
        loglik: res.value,
        gradient_norm: res.gradient_norm,
        condition_number: cond,
        ill_conditioned: !(cond < ILL_CONDITIONED),
        hessian_negative_definite: negdef,
    };
    Ok((Step1Params::from_unconstrained(&res.x, j, single), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;

    #[test]
    fn unconstrained_round_trip() {
        let p = Step1Params {
            phi: ItemParams {
                tau: vec![0.0, 0.4, -1.0],
                lambda: vec![1.0, 2.0, 0.5],
            },
            pi: 0.3,
            mu_p: -0.2,
            mu_f: 0.7,
            sigma2_p: 2.5,
            rho: -0.4,
        };
        let back = Step1Params::from_unconstrained(&p.to_unconstrained(true), 3, true);
        assert!((back.pi - 0.3).abs() < 1e-15 && (back.sigma2_p - 2.5).abs() < 1e-14);
        assert!((back.rho + 0.4).abs() < 1e-15);
        assert_eq!(back.phi, p.phi);
    }

    #[test]
    fn flat_item_collapses_to_binomial() {
        // π = 1 limit: a flat second item contributes Φ(τ) per response
        let mut p = Step1Params::initial(2);
        p.pi = 1.0 - 1e-15;
        p.phi.tau[1] = 0.3;
        p.phi.lambda[1] = 0.0;
        let n = 40;
        let block: Vec<i8> = (0..n).flat_map(|i| [MISSING, (i % 4 != 0) as i8]).collect();
        let side = SideData::new(2, block, None).unwrap();
        let ll = step1_loglik(&p, &side, 16).unwrap();
        let q = norm_cdf(0.3);
        let want = 30.0 * q.ln() + 10.0 * (1.0 - q).ln();
        assert!((ll - want).abs() < 1e-9, "{ll} vs {want}");
    }

    #[test]
    fn rejects_few_nodes() {
        let side = SideData::new(2, vec![1, 0], None).unwrap();
        assert!(step1_loglik(&Step1Params::initial(2), &side, 4).is_err());
    }
}
