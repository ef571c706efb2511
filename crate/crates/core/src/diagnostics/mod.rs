//! Posterior summaries, split R-hat and effective sample sizes, and fitted
//! correlation and class-probability tables by covariate profile.

mod fitted;

pub use fitted::{
    fitted_class_probs, fitted_correlations, render_class_probs, render_correlations, ClassProbRow, CorrelationRow,
    Profile,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ChainStats, DrawStore};
use crate::special::norm_quantile;

pub const QUANTILE_LEVELS: [f64; 7] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("no draws to summarize")]
    Empty,
    #[error("need at least 4 draws per split chain, found {0}")]
    TooShort(usize),
    #[error("unknown covariate {0} in profile {1}")]
    UnknownCovariate(String, String),
    #[error("fitted correlation {value} outside (-1, 1) for {pair} in profile {profile}")]
    OutOfRange { pair: String, profile: String, value: f64 },
    #[error("draw store lacks column {0}")]
    MissingColumn(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Linear interpolation between order statistics (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 7],
    /// 0, or 90/95/99: the widest equal-tailed level whose interval excludes zero.
    pub star: u8,
    pub rhat: f64,
    pub ess: f64,
}

impl ParamSummary {
    pub fn stars(&self) -> &'static str {
        match self.star {
            99 => "***",
            95 => "**",
            90 => "*",
            _ => "",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub draws: usize,
    pub chains: usize,
    pub params: Vec<ParamSummary>,
    /// Sampler tallies copied from the run, when available.
    pub chain_stats: Vec<ChainStats>,
}

fn star_flag(sorted: &[f64]) -> u8 {
    let excludes = |a: f64| {
        let lo = quantile_sorted(sorted, a / 2.0);
        let hi = quantile_sorted(sorted, 1.0 - a / 2.0);
        lo > 0.0 || hi < 0.0
    };
    if excludes(0.01) {
        99
    } else if excludes(0.05) {
        95
    } else if excludes(0.10) {
        90
    } else {
        0
    }
}

/// Moments, quantiles and flags of one column (order-invariant).
pub fn summarize_column(name: &str, values: &[f64]) -> Result<ParamSummary, DiagnosticsError> {
    if values.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    // sum in sorted order so the result does not depend on draw order
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd,
        quantiles: QUANTILE_LEVELS.map(|p| quantile_sorted(&sorted, p)),
        star: star_flag(&sorted),
        rhat: f64::NAN,
        ess: f64::NAN,
    })
}

/// Summaries of every column, with R-hat and ESS when each split chain has
/// at least 4 draws.
pub fn summarize(store: &DrawStore) -> Result<PosteriorSummary, DiagnosticsError> {
    if store.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let params = (0..store.names().len())
        .map(|j| {
            let mut s = summarize_column(&store.names()[j], &store.column(j))?;
            if let Ok(c) = convergence(&store.column_by_chain(j)) {
                s.rhat = c.rhat;
                s.ess = c.ess;
            }
            Ok(s)
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    Ok(PosteriorSummary {
        draws: store.len(),
        chains: store.n_chains(),
        params,
        chain_stats: store.stats().to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub rhat: f64,
    pub ess: f64,
}

fn split(chains: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = len / 2;
    if half < 4 {
        return Err(DiagnosticsError::TooShort(half));
    }
    Ok(chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[len - half..].to_vec()])
        .collect())
}

/// Normal scores of the pooled ranks (average ranks for ties).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = all.len() as f64;
    let mut out: Vec<Vec<f64>> = chains.iter().map(|v| vec![0.0; v.len()]).collect();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = norm_quantile((rank - 0.375) / (s + 0.25));
        for e in &all[i..=j] {
            out[e.1][e.2] = z;
        }
        i = j + 1;
    }
    out
}

fn rhat_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn autocovariance_at(x: &[f64], mu: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - mu) * (x[t + lag] - mu)).sum::<f64>() / n as f64
}

/// Multi-chain ESS with Geyer's initial monotone sequence. Lags are
/// computed on demand since the sequence usually stops early.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let acov = |t: usize| -> f64 {
        chains.iter().zip(&means).map(|(c, &mu)| autocovariance_at(c, mu, t)).sum::<f64>() / m
    };
    let a0 = acov(0);
    let w = a0 * nf / (nf - 1.0);
    let var_plus = if m > 1.0 {
        let grand = means.iter().sum::<f64>() / m;
        let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
        (nf - 1.0) / nf * w + b / nf
    } else {
        (nf - 1.0) / nf * w
    };
    if var_plus <= 0.0 {
        return m * nf;
    }
    let rho = |a: f64| 1.0 - (w - a) / var_plus;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let a = if t == 0 { a0 } else { acov(t) };
        let mut pair = rho(a) + rho(acov(t + 1));
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev);
        sum += pair;
        prev = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / (m * nf).log10().max(1.0));
    m * nf / tau
}

/// Split R-hat as the largest of the rank-normalized bulk, folded and raw
/// values (ranks cap the between-chain term, the raw value does not), and
/// rank-normalized bulk ESS. Constant draws give R-hat 1.
pub fn convergence(chains: &[Vec<f64>]) -> Result<Convergence, DiagnosticsError> {
    let halves = split(chains)?;
    let first = halves[0][0];
    if halves.iter().flatten().all(|&v| v == first) {
        let total = halves.iter().map(Vec::len).sum::<usize>() as f64;
        return Ok(Convergence { rhat: 1.0, ess: total });
    }
    let z = rank_normalize(&halves);
    let med = {
        let mut all: Vec<f64> = halves.iter().flatten().copied().collect();
        all.sort_by(|a, b| a.total_cmp(b));
        quantile_sorted(&all, 0.5)
    };
    let folded: Vec<Vec<f64>> = halves.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let zf = rank_normalize(&folded);
    Ok(Convergence {
        rhat: rhat_raw(&z).max(rhat_raw(&zf)).max(rhat_raw(&halves)),
        ess: ess_raw(&z),
    })
}

/// Aligned text table: mean, sd, quantiles, flags and convergence.
pub fn render_summary(s: &PosteriorSummary) -> String {
    let w = s.params.iter().map(|p| p.name.len()).max().unwrap_or(9).max(9);
    let mut out = format!(
        "{:<w$} {:>9} {:>8} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:<3} {:>7} {:>8}\n",
        "parameter", "mean", "sd", "2.5%", "5%", "25%", "50%", "75%", "95%", "97.5%", "", "rhat", "ess"
    );
    for p in &s.params {
        out.push_str(&format!("{:<w$} {:>9.4} {:>8.4}", p.name, p.mean, p.sd));
        for q in p.quantiles {
            out.push_str(&format!(" {q:>9.4}"));
        }
        out.push_str(&format!(" {:<3} {:>7.3} {:>8.0}\n", p.stars(), p.rhat, p.ess));
    }
    out.push_str(&format!("{} draws from {} chains\n", s.draws, s.chains));
    for c in &s.chain_stats {
        let rates = c.alpha_rejection_rates();
        let finite: Vec<f64> = rates.iter().copied().filter(|r| r.is_finite()).collect();
        if let (Some(lo), Some(hi)) = (
            finite.iter().copied().reduce(f64::min),
            finite.iter().copied().reduce(f64::max),
        ) {
            out.push_str(&format!("chain {}: alpha rejection {lo:.3} to {hi:.3}", c.chain));
        } else {
            out.push_str(&format!("chain {}:", c.chain));
        }
        for (n, a) in c.sigma_names.iter().zip(&c.sigma_acceptance) {
            out.push_str(&format!(", {n} acceptance {a:.3}"));
        }
        out.push('\n');
    }
    out
}
