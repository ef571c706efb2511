use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CorrelationSampler, DrawStore, EngineError, PriorConfig, SamplerConfig};
use crate::feasibility::{infeasible_points, TestSet};
use crate::linalg::cholesky_upper;
use crate::model::{block_log_prob, Dataset, ItemParams, MeasurementParams, ModelSpec, StructuralParams, MISSING};
use crate::samplers::{ars_sample, derive_stream_id, truncated_normal, LogDensity, RandomStream};
use crate::special::{ln_norm_pdf, log_norm_cdf};

const BLOCK_UNIT: u64 = 1;
const BLOCK_GAMMA: u64 = 2;
const BLOCK_BETA: u64 = 3;
const BLOCK_SIGMA: u64 = 4;
const BLOCK_ALPHA: u64 = 5;

/// Per-chain sampler telemetry. Counts cover the retained phase only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub chain: usize,
    /// `alpha.<pair>.<cov>` names of the coefficients, in `l*q+m` order.
    pub alpha_names: Vec<String>,
    pub alpha_proposals: Vec<u64>,
    pub alpha_rejections: Vec<u64>,
    /// `C_lm` after burn-in tuning.
    pub step_constants: Vec<f64>,
    pub sigma_names: Vec<String>,
    pub sigma_acceptance: Vec<f64>,
    pub rebaselines: usize,
    pub max_drift: f64,
}

impl ChainStats {
    /// Rejection rate per free coefficient (NaN when never proposed).
    pub fn alpha_rejection_rates(&self) -> Vec<f64> {
        self.alpha_proposals
            .iter()
            .zip(&self.alpha_rejections)
            .map(|(&p, &r)| if p == 0 { f64::NAN } else { r as f64 / p as f64 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub rows: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub stats: ChainStats,
}

/// Working state of one chain.
pub struct Chain<'a> {
    spec: &'a ModelSpec,
    phi: Vec<ItemParams>,
    data: &'a Dataset,
    priors: PriorConfig,
    config: SamplerConfig,
    chain_id: usize,
    params: StructuralParams,
    xi: Vec<[u8; 2]>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    lin: Vec<[f64; 4]>,
    corr: CorrelationSampler,
    unit_streams: Vec<RandomStream>,
    gamma_stream: RandomStream,
    beta_stream: RandomStream,
    sigma_stream: RandomStream,
    alpha_stream: RandomStream,
    sigma_prop: Vec<u64>,
    sigma_acc: Vec<u64>,
}

fn ars_err(block: &str) -> impl Fn(crate::samplers::ArsError) -> EngineError + '_ {
    move |source| EngineError::Ars {
        block: block.to_string(),
        source,
    }
}

/// Probit block log-likelihood plus a normal log-prior, for the `η` update.
struct ProbitNormal<'p> {
    tau: &'p [f64],
    lambda: &'p [f64],
    items: &'p [i8],
    mean: f64,
    var: f64,
}

impl LogDensity for ProbitNormal<'_> {
    fn eval(&self, x: f64) -> (f64, f64) {
        let d = x - self.mean;
        let mut h = -0.5 * d * d / self.var;
        let mut dh = -d / self.var;
        for (j, &y) in self.items.iter().enumerate() {
            if y == MISSING {
                continue;
            }
            let s = if y == 1 { 1.0 } else { -1.0 };
            let z = s * (self.tau[j] + self.lambda[j] * x);
            let lc = log_norm_cdf(z);
            h += lc;
            dh += s * self.lambda[j] * (ln_norm_pdf(z) - lc).exp();
        }
        (h, dh)
    }
}

/// Multinomial-logit conditional of one class coefficient, in terms of
/// `t_i = b_i + x_i g − a_i` with `a_i` the log-sum over the other cells.
struct LogitCoord<'p> {
    x: &'p [f64],
    b_minus_a: &'p [f64],
    sum_dx: f64,
    prior_var: f64,
}

impl LogDensity for LogitCoord<'_> {
    fn eval(&self, g: f64) -> (f64, f64) {
        let mut h = g * self.sum_dx - 0.5 * g * g / self.prior_var;
        let mut dh = self.sum_dx - g / self.prior_var;
        for (x, c) in self.x.iter().zip(self.b_minus_a) {
            let t = c + x * g;
            // softplus and logistic, stable on both sides
            let (sp, sig) = if t > 0.0 {
                let e = (-t).exp();
                (t + e.ln_1p(), 1.0 / (1.0 + e))
            } else {
                let e = t.exp();
                (e.ln_1p(), e / (1.0 + e))
            };
            h -= sp;
            dh -= x * sig;
        }
        (h, dh)
    }
}

impl<'a> Chain<'a> {
    pub fn new(
        spec: &'a ModelSpec,
        phi: &MeasurementParams,
        data: &'a Dataset,
        test_set: &TestSet,
        priors: &PriorConfig,
        config: &SamplerConfig,
        chain_id: usize,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        priors.validate()?;
        let phi = phi.per_dim(spec)?;
        let (n, k) = (data.n(), spec.k());
        if test_set.covariates() != spec.corr_cov().len() {
            return Err(EngineError::Config(format!(
                "test set has {} columns, correlation model has {}",
                test_set.covariates(),
                spec.corr_cov().len()
            )));
        }
        let params = StructuralParams::initial(spec);
        let free = (0..spec.pairs())
            .flat_map(|l| (0..spec.corr_cov().len()).map(move |m| (l, m)))
            .map(|(l, m)| spec.is_alpha_free(l, m))
            .collect();
        let corr = CorrelationSampler::new(
            data.x_corr().clone(),
            test_set.clone(),
            params.alpha.clone(),
            free,
            config.rw_constant_c,
            config.rebaseline_every,
            config.kernel,
        )?;
        let c = chain_id as u64;
        let seed = config.seed;
        let xi = (0..n).map(|_| [1, 1]).collect();
        let mut chain = Self {
            spec,
            phi,
            data,
            priors: priors.clone(),
            config: config.clone(),
            chain_id,
            params,
            xi,
            eta: vec![0.0; n * k],
            mu: vec![0.0; n * k],
            lin: vec![[0.0; 4]; n],
            corr,
            unit_streams: (0..n)
                .map(|i| RandomStream::new(seed, derive_stream_id(c, BLOCK_UNIT, i as u64)))
                .collect(),
            gamma_stream: RandomStream::new(seed, derive_stream_id(c, BLOCK_GAMMA, 0)),
            beta_stream: RandomStream::new(seed, derive_stream_id(c, BLOCK_BETA, 0)),
            sigma_stream: RandomStream::new(seed, derive_stream_id(c, BLOCK_SIGMA, 0)),
            alpha_stream: RandomStream::new(seed, derive_stream_id(c, BLOCK_ALPHA, 0)),
            sigma_prop: vec![0; k],
            sigma_acc: vec![0; k],
        };
        // η starts at zero and is drawn once from its conditionals
        chain.sample_eta()?;
        Ok(chain)
    }

    pub fn params(&self) -> &StructuralParams {
        &self.params
    }

    pub fn xi(&self) -> &[[u8; 2]] {
        &self.xi
    }

    /// `n × K` row-major.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn correlation_sampler(&self) -> &CorrelationSampler {
        &self.corr
    }

    /// Overwrites the latents (for tests that hold them fixed).
    pub fn set_latents(&mut self, xi: Vec<[u8; 2]>, eta: &[f64]) {
        assert_eq!(xi.len(), self.data.n());
        assert_eq!(eta.len(), self.eta.len());
        self.xi = xi;
        self.eta.copy_from_slice(eta);
        self.refresh_residuals();
    }

    /// Overwrites the structural parameters and rebuilds the caches.
    pub fn set_params(&mut self, params: StructuralParams) -> Result<(), EngineError> {
        params.validate(self.spec)?;
        self.corr.set_alpha(params.alpha.clone())?;
        self.params = params;
        let k = self.spec.k();
        let xm = self.data.x_mean();
        let xc = self.data.x_class();
        for i in 0..self.data.n() {
            for d in 0..k {
                self.mu[i * k + d] = (0..xm.cols()).map(|a| xm[(i, a)] * self.params.beta[(a, d)]).sum();
            }
            self.lin[i][0] = 0.0;
            for c in 1..4 {
                self.lin[i][c] = (0..xc.cols()).map(|r| xc[(i, r)] * self.params.gamma[(c - 1, r)]).sum();
            }
        }
        self.refresh_residuals();
        Ok(())
    }

    fn refresh_residuals(&mut self) {
        let k = self.spec.k();
        let eps = self.corr.residuals_mut();
        for i in 0..self.data.n() {
            for d in 0..k {
                eps[i * k + d] = (self.eta[i * k + d] - self.mu[i * k + d]) / self.params.sigma[d];
            }
        }
    }

    /// ξ from its four-cell conditional given η.
    pub fn sample_xi(&mut self) {
        let spec = self.spec;
        let data = self.data;
        let phi = &self.phi;
        let k = spec.k();
        let eta = &self.eta;
        let lin = &self.lin;
        self.xi
            .par_iter_mut()
            .zip(self.unit_streams.par_iter_mut())
            .enumerate()
            .for_each(|(i, (xi, st))| {
                let items = data.items(i);
                let nz = data.nonzero(i);
                let e = &eta[i * k..(i + 1) * k];
                let mut on = [0.0; 2];
                for (d, dim) in spec.dims().iter().enumerate() {
                    let off = spec.item_offset(d);
                    let s = spec.side_of(d);
                    on[s] += if dim.is_multi_item() {
                        block_log_prob(&phi[d], &items[off..off + dim.items], e[d])
                    } else {
                        match items[off] {
                            MISSING => 0.0,
                            1 if e[d] > 0.0 => 0.0,
                            0 if e[d] <= 0.0 => 0.0,
                            _ => f64::NEG_INFINITY,
                        }
                    };
                }
                let off_side = |s: usize| if nz[s] { f64::NEG_INFINITY } else { 0.0 };
                let lp = log_probs(&lin[i]);
                let w = [
                    lp[0] + off_side(0) + off_side(1),
                    lp[1] + off_side(0) + on[1],
                    lp[2] + on[0] + off_side(1),
                    lp[3] + on[0] + on[1],
                ];
                let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let u = st.uniform();
                // all cells impossible cannot happen: cell 11 always has positive mass
                let p = w.map(|v| (v - top).exp());
                let mut target = u * p.iter().sum::<f64>();
                let mut cell = 3;
                for (c, pc) in p.iter().enumerate() {
                    if target < *pc {
                        cell = c;
                        break;
                    }
                    target -= pc;
                }
                *xi = [(cell >> 1) as u8, (cell & 1) as u8];
            });
    }

    /// η coordinate by coordinate from its full conditional, dims in
    /// declaration order.
    pub fn sample_eta(&mut self) -> Result<(), EngineError> {
        let spec = self.spec;
        let data = self.data;
        let phi = &self.phi;
        let k = spec.k();
        let kk = k * k;
        let sigma = &self.params.sigma;
        let mu = &self.mu;
        let xi = &self.xi;
        let (eps, inv) = self.corr.residuals_and_inverses();
        self.eta
            .par_chunks_mut(k)
            .zip(eps.par_chunks_mut(k))
            .zip(self.unit_streams.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, ((eta, ep), st))| -> Result<(), EngineError> {
                let w = &inv[i * kk..(i + 1) * kk];
                let items = data.items(i);
                for d in 0..k {
                    let wdd = w[d * k + d];
                    let s: f64 = (0..k).filter(|&j| j != d).map(|j| w[d * k + j] * ep[j]).sum();
                    let m = mu[i * k + d] - sigma[d] * s / wdd;
                    let v = sigma[d] * sigma[d] / wdd;
                    let sd = v.sqrt();
                    let dim = &spec.dims()[d];
                    let on = xi[i][spec.side_of(d)] == 1;
                    let off = spec.item_offset(d);
                    let new = if !on {
                        m + sd * st.normal()
                    } else if dim.is_multi_item() {
                        let f = ProbitNormal {
                            tau: &phi[d].tau,
                            lambda: &phi[d].lambda,
                            items: &items[off..off + dim.items],
                            mean: m,
                            var: v,
                        };
                        ars_sample(&f, &[m - 1.5 * sd, eta[d], m + 1.5 * sd], st).map_err(ars_err("eta"))?
                    } else {
                        match items[off] {
                            1 => truncated_normal(m, sd, 0.0, f64::INFINITY, st)?,
                            0 => truncated_normal(m, sd, f64::NEG_INFINITY, 0.0, st)?,
                            _ => m + sd * st.normal(),
                        }
                    };
                    eta[d] = new;
                    ep[d] = (new - mu[i * k + d]) / sigma[d];
                }
                Ok(())
            })
    }

    /// Class coefficients one at a time by adaptive rejection sampling.
    pub fn sample_gamma(&mut self) -> Result<(), EngineError> {
        let n = self.data.n();
        let xc = self.data.x_class();
        let qc = xc.cols();
        let mut xs = Vec::with_capacity(n);
        let mut ca = Vec::with_capacity(n);
        for cell in 1..4 {
            for r in 0..qc {
                let g_old = self.params.gamma[(cell - 1, r)];
                xs.clear();
                ca.clear();
                let mut sum_dx = 0.0;
                let mut sum_x2 = 0.0;
                for i in 0..n {
                    let x = xc[(i, r)];
                    if x == 0.0 {
                        continue;
                    }
                    let lin = &self.lin[i];
                    let top = (0..4).filter(|&c| c != cell).map(|c| lin[c]).fold(f64::NEG_INFINITY, f64::max);
                    let a = top + (0..4).filter(|&c| c != cell).map(|c| (lin[c] - top).exp()).sum::<f64>().ln();
                    xs.push(x);
                    ca.push(lin[cell] - x * g_old - a);
                    if 2 * self.xi[i][0] as usize + self.xi[i][1] as usize == cell {
                        sum_dx += x;
                    }
                    sum_x2 += x * x;
                }
                let f = LogitCoord {
                    x: &xs,
                    b_minus_a: &ca,
                    sum_dx,
                    prior_var: self.priors.sigma2_gamma,
                };
                let spread = 2.0 / (0.25 * sum_x2 + 1.0 / self.priors.sigma2_gamma).sqrt();
                let g = ars_sample(&f, &[g_old - spread, g_old, g_old + spread], &mut self.gamma_stream)
                    .map_err(ars_err("gamma"))?;
                self.params.gamma[(cell - 1, r)] = g;
                let dg = g - g_old;
                for i in 0..n {
                    self.lin[i][cell] += xc[(i, r)] * dg;
                }
            }
        }
        Ok(())
    }

    /// Conditional of the mean coefficients of dim `d` given everything
    /// else: returns the mean and the upper Cholesky factor of the precision.
    pub fn beta_conditional(&self, d: usize) -> Result<(Vec<f64>, Vec<f64>), EngineError> {
        let (n, k) = (self.data.n(), self.spec.k());
        let kk = k * k;
        let xm = self.data.x_mean();
        let qm = xm.cols();
        let mut prec = vec![0.0; qm * qm];
        let mut rhs = vec![0.0; qm];
        for a in 0..qm {
            prec[a * qm + a] = 1.0 / self.priors.sigma2_beta;
        }
        let sd = self.params.sigma[d];
        let eps = self.corr.residuals();
        let inv = self.corr.inverses();
        for i in 0..n {
            let w = &inv[i * kk..(i + 1) * kk];
            let e = &eps[i * k..(i + 1) * k];
            let wdd = w[d * k + d];
            let s: f64 = (0..k).filter(|&j| j != d).map(|j| w[d * k + j] * e[j]).sum();
            let offset = -sd * s / wdd;
            let prec_i = wdd / (sd * sd);
            let target = self.eta[i * k + d] - offset;
            let x = xm.row(i);
            for a in 0..qm {
                rhs[a] += x[a] * target * prec_i;
                for b in 0..=a {
                    prec[a * qm + b] += x[a] * x[b] * prec_i;
                }
            }
        }
        for a in 0..qm {
            for b in 0..a {
                prec[b * qm + a] = prec[a * qm + b];
            }
        }
        let mut u = vec![0.0; qm * qm];
        cholesky_upper(&prec, &mut u, qm)
            .map_err(|e| EngineError::Config(format!("mean-coefficient precision: {e}")))?;
        // P⁻¹ rhs through Uᵀ y = rhs, U m = y
        let y = forward_sub(&u, &rhs, qm);
        Ok((back_sub(&u, &y, qm), u))
    }

    /// Mean coefficients of each dim from their conditional normal.
    pub fn sample_beta(&mut self) -> Result<(), EngineError> {
        let (n, k) = (self.data.n(), self.spec.k());
        let xm = self.data.x_mean();
        let qm = xm.cols();
        for d in 0..k {
            let (mut v, u) = self.beta_conditional(d)?;
            let z: Vec<f64> = (0..qm).map(|_| self.beta_stream.normal()).collect();
            let dz = back_sub(&u, &z, qm);
            for a in 0..qm {
                v[a] += dz[a];
                self.params.beta[(a, d)] = v[a];
            }
            let sd = self.params.sigma[d];
            let eps = self.corr.residuals_mut();
            for i in 0..n {
                let m: f64 = xm.row(i).iter().zip(&v).map(|(x, b)| x * b).sum();
                self.mu[i * k + d] = m;
                eps[i * k + d] = (self.eta[i * k + d] - m) / sd;
            }
        }
        Ok(())
    }

    /// Free scales by random-walk Metropolis with a step proportional to the
    /// current value (Hastings-corrected).
    pub fn sample_sigma(&mut self) {
        let (n, k) = (self.data.n(), self.spec.k());
        let kk = k * k;
        let alpha = n as f64 + 2.0 * self.priors.ig_a0;
        let free: Vec<usize> = self.spec.free_scale_dims().collect();
        for d in free {
            let sd = self.params.sigma[d];
            let (mut b1, mut b2) = (self.priors.ig_b0, 0.0);
            {
                let eps = self.corr.residuals();
                let inv = self.corr.inverses();
                for i in 0..n {
                    let w = &inv[i * kk..(i + 1) * kk];
                    let e = &eps[i * k..(i + 1) * k];
                    let raw = self.eta[i * k + d] - self.mu[i * k + d];
                    b1 += 0.5 * raw * raw * w[d * k + d];
                    let s: f64 = (0..k).filter(|&j| j != d).map(|j| w[d * k + j] * e[j]).sum();
                    b2 += 0.5 * raw * s;
                }
            }
            let log_target = |s: f64| -(alpha + 1.0) * s.ln() - b1 / (s * s) - 2.0 * b2 / s;
            let step = self.config.sigma_step;
            let prop = sd + step * sd * self.sigma_stream.normal();
            let log_u = self.sigma_stream.uniform().ln();
            self.sigma_prop[d] += 1;
            if !(prop > 0.0) {
                continue;
            }
            // proposal sd depends on the current value
            let log_q = |to: f64, from: f64| {
                let z = (to - from) / (step * from);
                -from.ln() - 0.5 * z * z
            };
            let ratio = log_target(prop) - log_target(sd) + log_q(sd, prop) - log_q(prop, sd);
            if log_u < ratio {
                self.sigma_acc[d] += 1;
                self.params.sigma[d] = prop;
                let eps = self.corr.residuals_mut();
                for i in 0..n {
                    eps[i * k + d] = (self.eta[i * k + d] - self.mu[i * k + d]) / prop;
                }
            }
        }
    }

    pub fn sample_alpha(&mut self) -> Result<(), EngineError> {
        self.corr.sweep(&mut self.alpha_stream)?;
        self.params.alpha = self.corr.alpha().clone();
        Ok(())
    }

    /// One full sweep: ξ, η, γ, β, σ, α.
    pub fn iterate(&mut self) -> Result<(), EngineError> {
        self.sample_xi();
        self.sample_eta()?;
        self.sample_gamma()?;
        self.sample_beta()?;
        self.sample_sigma();
        self.sample_alpha()
    }

    fn stats(&self) -> ChainStats {
        let (p, r) = self.corr.counts();
        let q = self.spec.corr_cov().len();
        let cov = self.spec.covariate_names();
        ChainStats {
            chain: self.chain_id,
            alpha_names: (0..self.spec.pairs())
                .flat_map(|l| (0..q).map(move |m| (l, m)))
                .map(|(l, m)| format!("alpha.{}.{}", self.spec.pair_name(l), cov[self.spec.corr_cov()[m]]))
                .collect(),
            alpha_proposals: p.to_vec(),
            alpha_rejections: r.to_vec(),
            step_constants: self.corr.step_constants().to_vec(),
            sigma_names: self.spec.free_scale_dims().map(|d| format!("sigma.{}", self.spec.dims()[d].name)).collect(),
            sigma_acceptance: self
                .spec
                .free_scale_dims()
                .map(|d| self.sigma_acc[d] as f64 / self.sigma_prop[d].max(1) as f64)
                .collect(),
            rebaselines: self.corr.rebaseline_count(),
            max_drift: self.corr.max_drift(),
        }
    }

    /// Runs burn-in (with tuning of the step constants) and the retained phase.
    pub fn run(mut self) -> Result<ChainOutput, EngineError> {
        let cfg = self.config.clone();
        let test = self.corr.test_set().clone();
        let mut rows = Vec::with_capacity(cfg.retained_per_chain());
        let mut iterations = Vec::with_capacity(cfg.retained_per_chain());
        for t in 0..cfg.iterations {
            self.iterate()?;
            if t < cfg.burn_in {
                if cfg.tune_interval > 0 && (t + 1) % cfg.tune_interval == 0 {
                    self.corr.tune(cfg.target_rejection_band);
                }
                if t + 1 == cfg.burn_in {
                    self.corr.reset_counts();
                    self.sigma_prop.fill(0);
                    self.sigma_acc.fill(0);
                }
                continue;
            }
            if (t - cfg.burn_in) % cfg.thin == 0 {
                let bad = infeasible_points(&self.params.alpha, &test);
                if !bad.is_empty() {
                    return Err(EngineError::RetainedInfeasible {
                        chain: self.chain_id,
                        iteration: t,
                        points: bad.len(),
                    });
                }
                rows.push(self.params.flatten(self.spec));
                iterations.push(t);
            }
        }
        Ok(ChainOutput {
            rows,
            iterations,
            stats: self.stats(),
        })
    }
}

fn log_probs(lin: &[f64; 4]) -> [f64; 4] {
    let top = lin.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + lin.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    lin.map(|v| v - lse)
}

/// Solves `Uᵀ y = b` for upper-triangular `U`.
fn forward_sub(u: &[f64], b: &[f64], q: usize) -> Vec<f64> {
    let mut y = vec![0.0; q];
    for a in 0..q {
        let s: f64 = (0..a).map(|p| u[p * q + a] * y[p]).sum();
        y[a] = (b[a] - s) / u[a * q + a];
    }
    y
}

/// Solves `U x = y`.
fn back_sub(u: &[f64], y: &[f64], q: usize) -> Vec<f64> {
    let mut x = vec![0.0; q];
    for a in (0..q).rev() {
        let s: f64 = (a + 1..q).map(|p| u[a * q + p] * x[p]).sum();
        x[a] = (y[a] - s) / u[a * q + a];
    }
    x
}

/// One chain from the initial state.
pub fn run_chain(
    spec: &ModelSpec,
    phi: &MeasurementParams,
    data: &Dataset,
    test_set: &TestSet,
    priors: &PriorConfig,
    config: &SamplerConfig,
    chain: usize,
) -> Result<ChainOutput, EngineError> {
    Chain::new(spec, phi, data, test_set, priors, config, chain)?.run()
}

/// All chains, run in parallel, collected in chain order.
pub fn run_chains(
    spec: &ModelSpec,
    phi: &MeasurementParams,
    data: &Dataset,
    test_set: &TestSet,
    priors: &PriorConfig,
    config: &SamplerConfig,
) -> Result<DrawStore, EngineError> {
    config.validate()?;
    let outs: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(spec, phi, data, test_set, priors, config, c))
        .collect::<Result<_, _>>()?;
    Ok(DrawStore::from_chains(StructuralParams::names(spec), outs))
}
