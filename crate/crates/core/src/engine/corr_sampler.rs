use rayon::prelude::*;

use super::{EngineError, KernelMode};
use crate::feasibility::{gh_from_upper, interval_from_gh, is_feasible, AlphaMatrix, TestSet};
use crate::linalg::{
    assemble_into, cholesky_upper, offdiag_inverse_update, perturb_chol_in_place,
    permute_and_retriangularize, quad_form, spd_inverse_det_into, Matrix, PairLayout,
};
use crate::samplers::RandomStream;
use crate::special::norm_quantile;

/// Units per work chunk. Partial sums are formed per chunk and added in chunk
/// order, so results do not depend on the number of worker threads.
pub const CHUNK: usize = 256;

const DRIFT_TOL: f64 = 1e-8;

/// Elementwise Metropolis–Hastings sampler for the correlation coefficients
/// `α`, holding the per-unit inverse and log-determinant caches and the
/// Cholesky factors at every test point.
///
/// Each coefficient gets a random-walk proposal with step
/// `C_lm / (√n max_i |X_im|)`; proposals outside the feasible interval are
/// rejected before any likelihood work.
#[derive(Clone, Debug)]
pub struct CorrelationSampler {
    k: usize,
    q: usize,
    n: usize,
    layout: PairLayout,
    alpha: AlphaMatrix,
    free: Vec<bool>,
    x: Matrix,
    eps: Vec<f64>,
    inv: Vec<f64>,
    logdet: Vec<f64>,
    quad: Vec<f64>,
    test: TestSet,
    gammas: Vec<f64>,
    active: Vec<Vec<usize>>,
    step_base: Vec<f64>,
    c: Vec<f64>,
    proposals: Vec<u64>,
    rejections: Vec<u64>,
    window_prop: Vec<u64>,
    window_rej: Vec<u64>,
    bracket: Vec<(f64, f64)>,
    accepts_since_rebaseline: usize,
    rebaseline_every: usize,
    rebaselines: usize,
    max_drift: f64,
    mode: KernelMode,
    prop_inv: Vec<f64>,
    prop_logdet: Vec<f64>,
    prop_quad: Vec<f64>,
    prop_gammas: Vec<f64>,
    gh: Vec<(f64, f64)>,
}

impl CorrelationSampler {
    /// `x` is `n × q` (the correlation covariates of every unit), `free[l*q+m]`
    /// marks coefficients that are sampled. Residuals start at zero.
    pub fn new(
        x: Matrix,
        test: TestSet,
        alpha: AlphaMatrix,
        free: Vec<bool>,
        c0: f64,
        rebaseline_every: usize,
        mode: KernelMode,
    ) -> Result<Self, EngineError> {
        let (n, q, k) = (x.rows(), x.cols(), alpha.dim());
        let l = alpha.pairs();
        if alpha.covariates() != q || test.covariates() != q {
            return Err(EngineError::Config(format!(
                "alpha has {} covariates, data {q}, test set {}",
                alpha.covariates(),
                test.covariates()
            )));
        }
        if free.len() != l * q {
            return Err(EngineError::Config("free mask has the wrong length".into()));
        }
        if !is_feasible(&alpha, &test) {
            return Err(EngineError::Config("initial alpha is not feasible on the test set".into()));
        }
        let active: Vec<Vec<usize>> = (0..q).map(|m| (0..n).filter(|&i| x[(i, m)] != 0.0).collect()).collect();
        let step_base = (0..q)
            .map(|m| {
                let (src, rows) = if n > 0 { (&x, n) } else { (test.points(), test.len()) };
                let max = (0..rows).map(|i| src[(i, m)].abs()).fold(0.0, f64::max);
                if max == 0.0 {
                    0.0
                } else {
                    1.0 / ((n.max(1) as f64).sqrt() * max)
                }
            })
            .collect();
        let t = test.len();
        let mut s = Self {
            k,
            q,
            n,
            layout: PairLayout::new(k),
            alpha,
            free,
            x,
            eps: vec![0.0; n * k],
            inv: vec![0.0; n * k * k],
            logdet: vec![0.0; n],
            quad: vec![0.0; n],
            gammas: vec![0.0; t * k * k],
            test,
            active,
            step_base,
            c: vec![c0; l * q],
            proposals: vec![0; l * q],
            rejections: vec![0; l * q],
            window_prop: vec![0; l * q],
            window_rej: vec![0; l * q],
            bracket: vec![(0.0, f64::INFINITY); l * q],
            accepts_since_rebaseline: 0,
            rebaseline_every,
            rebaselines: 0,
            max_drift: 0.0,
            mode,
            prop_inv: vec![0.0; n * k * k],
            prop_logdet: vec![0.0; n],
            prop_quad: vec![0.0; n],
            prop_gammas: vec![0.0; t * k * k],
            gh: vec![(0.0, 0.0); t],
        };
        s.recompute_dense()?;
        Ok(s)
    }

    /// Number of units.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> &AlphaMatrix {
        &self.alpha
    }

    pub fn test_set(&self) -> &TestSet {
        &self.test
    }

    /// Standardized residuals `S⁻¹(η_i − μ_i)`, `n × K` row-major.
    pub fn residuals(&self) -> &[f64] {
        &self.eps
    }

    /// Mutable residuals; callers must not touch them during a sweep.
    pub fn residuals_mut(&mut self) -> &mut [f64] {
        &mut self.eps
    }

    /// Mutable residuals together with the cached inverses.
    pub fn residuals_and_inverses(&mut self) -> (&mut [f64], &[f64]) {
        (&mut self.eps, &self.inv)
    }

    /// Cached `R_i⁻¹` of unit `i`.
    pub fn inverse(&self, i: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.inv[i * kk..(i + 1) * kk]
    }

    pub fn inverses(&self) -> &[f64] {
        &self.inv
    }

    pub fn log_det(&self, i: usize) -> f64 {
        self.logdet[i]
    }

    /// Cached factor `Γ_j` at test point `j`.
    pub fn test_factor(&self, j: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.gammas[j * kk..(j + 1) * kk]
    }

    pub fn step_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn set_step_constants(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.c.len());
        self.c.copy_from_slice(c);
    }

    /// Cumulative proposal and rejection counts per coefficient `l*q+m`.
    pub fn counts(&self) -> (&[u64], &[u64]) {
        (&self.proposals, &self.rejections)
    }

    pub fn reset_counts(&mut self) {
        self.proposals.fill(0);
        self.rejections.fill(0);
        self.window_prop.fill(0);
        self.window_rej.fill(0);
    }

    /// Rejection rate per coefficient since the last reset (NaN if never proposed).
    pub fn rejection_rates(&self) -> Vec<f64> {
        self.proposals
            .iter()
            .zip(&self.rejections)
            .map(|(&p, &r)| if p == 0 { f64::NAN } else { r as f64 / p as f64 })
            .collect()
    }

    pub fn is_free(&self, l: usize, m: usize) -> bool {
        self.free[l * self.q + m] && self.step_base[m] > 0.0
    }

    pub fn rebaseline_count(&self) -> usize {
        self.rebaselines
    }

    /// Largest cache discrepancy seen at any re-baseline.
    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    fn recompute_dense(&mut self) -> Result<(), EngineError> {
        let (k, q) = (self.k, self.q);
        let kk = k * k;
        let alpha = &self.alpha;
        let x = &self.x;
        let eps = &self.eps;
        self.inv
            .par_chunks_mut(CHUNK * kk)
            .zip(self.logdet.par_chunks_mut(CHUNK))
            .zip(self.quad.par_chunks_mut(CHUNK))
            .enumerate()
            .try_for_each(|(c, ((inv, ld), qd))| -> Result<(), EngineError> {
                let mut r = vec![0.0; kk];
                let mut work = vec![0.0; kk];
                for (p, ld) in ld.iter_mut().enumerate() {
                    let i = c * CHUNK + p;
                    let rho = alpha.correlations_at(&x.row(i)[..q]);
                    assemble_into(k, rho.values(), &mut r);
                    let inv_i = &mut inv[p * kk..(p + 1) * kk];
                    let det = spd_inverse_det_into(&r, inv_i, &mut work, k)
                        .map_err(|e| EngineError::Infeasible(format!("unit {i}: {e}")))?;
                    *ld = det.ln();
                    qd[p] = quad_form(inv_i, &eps[i * k..(i + 1) * k]);
                }
                Ok(())
            })?;
        let points = self.test.points();
        let mut r = vec![0.0; kk];
        for j in 0..self.test.len() {
            let rho = alpha.correlations_at(points.row(j));
            assemble_into(k, rho.values(), &mut r);
            cholesky_upper(&r, &mut self.gammas[j * kk..(j + 1) * kk], k)
                .map_err(|e| EngineError::Infeasible(format!("test point {j}: {e}")))?;
        }
        Ok(())
    }

    /// Recomputes every cache densely and checks the incremental copies
    /// against it. Returns the largest discrepancy.
    pub fn rebaseline(&mut self) -> Result<f64, EngineError> {
        let old_inv = self.inv.clone();
        let old_ld = self.logdet.clone();
        let old_g = self.gammas.clone();
        self.recompute_dense()?;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        let mut drift = 0.0f64;
        for (a, b) in old_inv.iter().zip(&self.inv) {
            drift = drift.max(rel(*a, *b));
        }
        for (a, b) in old_ld.iter().zip(&self.logdet) {
            drift = drift.max((a - b).abs());
        }
        for (a, b) in old_g.iter().zip(&self.gammas) {
            drift = drift.max((a - b).abs());
        }
        self.max_drift = self.max_drift.max(drift);
        self.rebaselines += 1;
        self.accepts_since_rebaseline = 0;
        if !(drift <= DRIFT_TOL) {
            return Err(EngineError::CacheDrift(drift));
        }
        Ok(drift)
    }

    /// Replaces `α` and rebuilds every cache densely.
    pub fn set_alpha(&mut self, alpha: AlphaMatrix) -> Result<(), EngineError> {
        if alpha.dim() != self.k || alpha.covariates() != self.q {
            return Err(EngineError::Config("alpha has the wrong shape".into()));
        }
        if !is_feasible(&alpha, &self.test) {
            return Err(EngineError::Infeasible("alpha is not feasible on the test set".into()));
        }
        self.alpha = alpha;
        self.recompute_dense()
    }

    /// Recomputes `εᵢᵀ R_i⁻¹ εᵢ` after the residuals changed.
    pub fn refresh_quadratic_forms(&mut self) {
        let k = self.k;
        let kk = k * k;
        let inv = &self.inv;
        let eps = &self.eps;
        self.quad.par_chunks_mut(CHUNK).enumerate().for_each(|(c, qd)| {
            for (p, v) in qd.iter_mut().enumerate() {
                let i = c * CHUNK + p;
                *v = quad_form(&inv[i * kk..(i + 1) * kk], &eps[i * k..(i + 1) * k]);
            }
        });
    }

    /// `(g_jl, h_jl)` at every test point for pair `l`.
    fn compute_gh(&mut self, l: usize) -> Result<(), EngineError> {
        let k = self.k;
        let kk = k * k;
        let (k1, k2) = self.layout.position(l);
        let mut moved = vec![0.0; kk];
        for j in 0..self.test.len() {
            let g = &self.gammas[j * kk..(j + 1) * kk];
            let res = if k1 == k - 1 && k2 == k - 2 {
                gh_from_upper(g, k)
            } else {
                permute_and_retriangularize(g, &mut moved, k, k1, k2);
                gh_from_upper(&moved, k)
            };
            self.gh[j] = res.map_err(|e| EngineError::Infeasible(format!("test point {j}: {e}")))?;
        }
        Ok(())
    }

    /// One elementwise pass over all free coefficients.
    pub fn sweep(&mut self, stream: &mut RandomStream) -> Result<(), EngineError> {
        self.refresh_quadratic_forms();
        for l in 0..self.layout.len() {
            if !(0..self.q).any(|m| self.is_free(l, m)) {
                continue;
            }
            self.compute_gh(l)?;
            for m in 0..self.q {
                if self.is_free(l, m) {
                    self.update_one(l, m, stream)?;
                }
            }
        }
        Ok(())
    }

    fn update_one(&mut self, l: usize, m: usize, stream: &mut RandomStream) -> Result<(), EngineError> {
        let idx = l * self.q + m;
        let interval = interval_from_gh(self.alpha.coeffs().row(l), m, self.test.points(), &self.gh)
            .map_err(|e| EngineError::Infeasible(format!("coefficient ({l}, {m}): {e}")))?;
        let current = self.alpha.get(l, m);
        let delta = self.c[idx] * self.step_base[m] * stream.normal();
        let proposal = current + delta;
        self.proposals[idx] += 1;
        self.window_prop[idx] += 1;
        // draw u before deciding so the stream advances the same way on every path
        let log_u = stream.uniform().ln();
        let accepted = interval.contains(proposal)
            && proposal != current
            && log_u < self.log_ratio(l, m, delta, proposal)?
            && self.propose_factors(l, m, delta, proposal);
        if !accepted {
            self.rejections[idx] += 1;
            self.window_rej[idx] += 1;
            return Ok(());
        }
        self.commit(m, proposal, l);
        self.accepts_since_rebaseline += 1;
        if self.accepts_since_rebaseline >= self.rebaseline_every {
            self.rebaseline()?;
        }
        Ok(())
    }

    /// Log acceptance ratio for moving `α_lm` by `delta`; fills the proposal buffers.
    fn log_ratio(&mut self, l: usize, m: usize, delta: f64, proposal: f64) -> Result<f64, EngineError> {
        let k = self.k;
        let kk = k * k;
        let (k1, k2) = self.layout.position(l);
        let active = &self.active[m];
        let na = active.len();
        let x = &self.x;
        let inv = &self.inv;
        let eps = &self.eps;
        let logdet = &self.logdet;
        let quad = &self.quad;
        let mode = self.mode;
        let q = self.q;
        let mut alpha_new = None;
        if mode == KernelMode::Dense {
            let mut a = self.alpha.clone();
            a.set(l, m, proposal);
            alpha_new = Some(a);
        }
        let alpha_new = alpha_new.as_ref();
        let partial: Vec<f64> = self.prop_inv[..na * kk]
            .par_chunks_mut(CHUNK * kk)
            .zip(self.prop_logdet[..na].par_chunks_mut(CHUNK))
            .zip(self.prop_quad[..na].par_chunks_mut(CHUNK))
            .zip(active.par_chunks(CHUNK))
            .map(|(((pinv, pld), pq), units)| {
                let mut scratch = vec![0.0; 2 * kk.max(2 * k)];
                let mut acc = 0.0;
                for (p, &i) in units.iter().enumerate() {
                    let out = &mut pinv[p * kk..(p + 1) * kk];
                    let e_i = &eps[i * k..(i + 1) * k];
                    let ln_ratio = match mode {
                        KernelMode::Incremental => {
                            let e = delta * x[(i, m)];
                            match offdiag_inverse_update(&inv[i * kk..(i + 1) * kk], out, &mut scratch, k, k1, k2, e) {
                                Ok(r) if r > 0.0 => r.ln(),
                                _ => return f64::NEG_INFINITY,
                            }
                        }
                        KernelMode::Dense => {
                            let rho = alpha_new.unwrap().correlations_at(&x.row(i)[..q]);
                            let (r, work) = scratch.split_at_mut(kk);
                            assemble_into(k, rho.values(), r);
                            match spd_inverse_det_into(r, out, &mut work[..kk], k) {
                                Ok(det) => det.ln() - logdet[i],
                                Err(_) => return f64::NEG_INFINITY,
                            }
                        }
                    };
                    let qn = quad_form(out, e_i);
                    pld[p] = logdet[i] + ln_ratio;
                    pq[p] = qn;
                    acc += -0.5 * ln_ratio - 0.5 * (qn - quad[i]);
                }
                acc
            })
            .collect();
        let total: f64 = partial.iter().sum();
        Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
    }

    /// Updated test-point factors into the proposal buffer; false if any
    /// factor loses positive definiteness numerically.
    fn propose_factors(&mut self, l: usize, m: usize, delta: f64, proposal: f64) -> bool {
        let k = self.k;
        let kk = k * k;
        let (k1, k2) = self.layout.position(l);
        let points = self.test.points();
        let mut w = vec![0.0; k];
        self.prop_gammas.copy_from_slice(&self.gammas);
        match self.mode {
            KernelMode::Incremental => {
                for j in 0..self.test.len() {
                    let e = delta * points[(j, m)];
                    let g = &mut self.prop_gammas[j * kk..(j + 1) * kk];
                    if perturb_chol_in_place(g, &mut w, k, k1, k2, e).is_err() {
                        return false;
                    }
                }
            }
            KernelMode::Dense => {
                let mut a = self.alpha.clone();
                a.set(l, m, proposal);
                let mut r = vec![0.0; kk];
                for j in 0..self.test.len() {
                    let rho = a.correlations_at(points.row(j));
                    assemble_into(k, rho.values(), &mut r);
                    if cholesky_upper(&r, &mut self.prop_gammas[j * kk..(j + 1) * kk], k).is_err() {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn commit(&mut self, m: usize, proposal: f64, l: usize) {
        let kk = self.k * self.k;
        for (p, &i) in self.active[m].iter().enumerate() {
            self.inv[i * kk..(i + 1) * kk].copy_from_slice(&self.prop_inv[p * kk..(p + 1) * kk]);
            self.logdet[i] = self.prop_logdet[p];
            self.quad[i] = self.prop_quad[p];
        }
        std::mem::swap(&mut self.gammas, &mut self.prop_gammas);
        self.alpha.set(l, m, proposal);
    }

    /// Adjusts each `C_lm` from the rejection rate of the current tuning
    /// window. The jump assumes a Gaussian target, where a random walk with
    /// step `s` accepts `2Φ(-s/2)` of the time, and is capped at a factor of 3
    /// and kept inside the bracket of values already seen on each side of the
    /// band.
    pub fn tune(&mut self, band: (f64, f64)) {
        let target = norm_quantile(0.5 * (1.0 - 0.5 * (band.0 + band.1)));
        for idx in 0..self.c.len() {
            let props = self.window_prop[idx];
            if props == 0 {
                continue;
            }
            let rate = self.window_rej[idx] as f64 / props as f64;
            if rate >= band.0 && rate <= band.1 {
                continue;
            }
            let c = self.c[idx];
            let (lo, hi) = &mut self.bracket[idx];
            if rate < band.0 {
                // steps too small
                *lo = c;
                if *hi <= *lo * 1.05 {
                    *hi = f64::INFINITY;
                }
            } else {
                *hi = c;
                if *lo >= *hi / 1.05 {
                    *lo = 0.0;
                }
            }
            let accept = (1.0 - rate).clamp(0.01, 0.99);
            let mut next = c * (target / norm_quantile(0.5 * accept)).clamp(1.0 / 3.0, 3.0);
            if !(next > *lo && next < *hi) {
                next = if *lo > 0.0 && hi.is_finite() { (*lo * *hi).sqrt() } else { next.clamp(*lo, *hi) };
            }
            self.c[idx] = next;
        }
        self.window_prop.fill(0);
        self.window_rej.fill(0);
    }
}
