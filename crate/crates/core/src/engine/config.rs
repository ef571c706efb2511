use serde::{Deserialize, Serialize};

use super::EngineError;

/// Prior hyperparameters. The prior on `α` is uniform over the feasible set
/// and has no parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub sigma2_gamma: f64,
    pub sigma2_beta: f64,
    /// Inverse-gamma shape for each free `σ²`.
    pub ig_a0: f64,
    /// Inverse-gamma scale for each free `σ²`.
    pub ig_b0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            sigma2_gamma: 100.0,
            sigma2_beta: 100.0,
            ig_a0: 1e-5,
            ig_b0: 1e-5,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, v) in [
            ("sigma2_gamma", self.sigma2_gamma),
            ("sigma2_beta", self.sigma2_beta),
            ("ig_a0", self.ig_a0),
            ("ig_b0", self.ig_b0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EngineError::Config(format!("prior {name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Incremental rank-1 kernels, or full recomputation (for benchmarking).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    #[default]
    Incremental,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial random-walk constant `C` for every `α` coefficient.
    pub rw_constant_c: f64,
    pub target_rejection_band: (f64, f64),
    /// Retune `C` every this many burn-in iterations; 0 disables tuning.
    pub tune_interval: usize,
    /// Dense recompute of all cached matrices after this many accepted `α` moves.
    pub rebaseline_every: usize,
    /// Random-walk step for `σ` as a fraction of its current value.
    pub sigma_step: f64,
    pub kernel: KernelMode,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            iterations: 20_000,
            burn_in: 2_000,
            thin: 1,
            rw_constant_c: 1.0,
            target_rejection_band: (0.7, 0.8),
            tune_interval: 2_000,
            rebaseline_every: 10_000,
            sigma_step: 0.1,
            kernel: KernelMode::Incremental,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.chains == 0 || self.chains > 255 {
            return bad("chains must be between 1 and 255");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.burn_in >= self.iterations {
            return bad("burn_in must be smaller than iterations");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if !(self.rw_constant_c > 0.0 && self.rw_constant_c.is_finite()) {
            return bad("rw_constant_c must be positive");
        }
        let (lo, hi) = self.target_rejection_band;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad("target_rejection_band must satisfy 0 < lo < hi < 1");
        }
        if self.rebaseline_every == 0 {
            return bad("rebaseline_every must be positive");
        }
        if !(self.sigma_step > 0.0 && self.sigma_step.is_finite()) {
            return bad("sigma_step must be positive");
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}
