use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quantile_sorted, DiagnosticsError};
use crate::engine::DrawStore;
use crate::model::{class_probs, Dataset, ModelSpec, StructuralParams};

/// Covariate profile: the sample as observed, with the listed base
/// covariates overridden for every unit. An empty map is the overall profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

impl Profile {
    pub fn overall() -> Self {
        Self {
            name: "overall".into(),
            fixed: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub profile: String,
    pub pair: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProbRow {
    pub profile: String,
    /// Cells 00, 01, 10, 11.
    pub cells: [f64; 4],
    pub p_g: f64,
    pub p_r: f64,
    /// `π00 π11 / (π01 π10)` of the averaged cell probabilities.
    pub odds_ratio: f64,
}

fn draws_as_params(store: &DrawStore, spec: &ModelSpec) -> Result<Vec<StructuralParams>, DiagnosticsError> {
    let names = StructuralParams::names(spec);
    if let Some(n) = names.iter().find(|n| store.index_of(n).is_none()) {
        return Err(DiagnosticsError::MissingColumn(n.clone()));
    }
    let idx: Vec<usize> = names.iter().map(|n| store.index_of(n).unwrap()).collect();
    (0..store.len())
        .map(|r| {
            let row = store.row(r);
            let v: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
            Ok(StructuralParams::unflatten(spec, &v)?)
        })
        .collect()
}

/// Expanded covariate rows of every unit under `profile`.
fn profile_rows(spec: &ModelSpec, data: &Dataset, profile: &Profile) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let base = spec.base_names();
    let mut over = Vec::new();
    for (name, v) in &profile.fixed {
        let col = base
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| DiagnosticsError::UnknownCovariate(name.clone(), profile.name.clone()))?;
        over.push((col + 1, *v));
    }
    let z = data.z();
    Ok((0..data.n())
        .map(|i| {
            let mut row = z.row(i).to_vec();
            for &(c, v) in &over {
                row[c] = v;
            }
            spec.expansion().expand(&row)
        })
        .collect())
}

fn select(row: &[f64], cols: &[usize]) -> Vec<f64> {
    cols.iter().map(|&c| row[c]).collect()
}

/// Correlations averaged over units and draws, with the 2.5% and 97.5%
/// quantiles of the per-draw unit averages.
pub fn fitted_correlations(
    store: &DrawStore,
    spec: &ModelSpec,
    data: &Dataset,
    profiles: &[Profile],
) -> Result<Vec<CorrelationRow>, DiagnosticsError> {
    if store.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let draws = draws_as_params(store, spec)?;
    let q = spec.corr_cov().len();
    let mut out = Vec::new();
    for profile in profiles {
        let rows = profile_rows(spec, data, profile)?;
        // correlations are linear in the covariates, so average those first
        let mut xbar = vec![0.0; q];
        for r in &rows {
            for (m, v) in select(r, spec.corr_cov()).iter().enumerate() {
                xbar[m] += v / rows.len().max(1) as f64;
            }
        }
        for l in 0..spec.pairs() {
            let mut vals: Vec<f64> = draws
                .iter()
                .map(|p| (0..q).map(|m| p.alpha.get(l, m) * xbar[m]).sum::<f64>())
                .collect();
            if let Some(&bad) = vals.iter().find(|v| !(v.abs() < 1.0)) {
                return Err(DiagnosticsError::OutOfRange {
                    pair: spec.pair_name(l),
                    profile: profile.name.clone(),
                    value: bad,
                });
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.sort_by(|a, b| a.total_cmp(b));
            out.push(CorrelationRow {
                profile: profile.name.clone(),
                pair: spec.pair_name(l),
                mean,
                lower: quantile_sorted(&vals, 0.025),
                upper: quantile_sorted(&vals, 0.975),
            });
        }
    }
    Ok(out)
}

/// Class probabilities averaged over units and draws, with side marginals
/// and the odds ratio.
pub fn fitted_class_probs(
    store: &DrawStore,
    spec: &ModelSpec,
    data: &Dataset,
    profiles: &[Profile],
) -> Result<Vec<ClassProbRow>, DiagnosticsError> {
    if store.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let draws = draws_as_params(store, spec)?;
    let mut out = Vec::new();
    for profile in profiles {
        let xs: Vec<Vec<f64>> = profile_rows(spec, data, profile)?
            .iter()
            .map(|r| select(r, spec.class_cov()))
            .collect();
        let per_draw: Vec<[f64; 4]> = draws
            .par_iter()
            .map(|p| {
                let mut acc = [0.0; 4];
                for x in &xs {
                    let pi = class_probs(&p.gamma, x);
                    for c in 0..4 {
                        acc[c] += pi[c];
                    }
                }
                acc.map(|v| v / xs.len().max(1) as f64)
            })
            .collect();
        let mut cells = [0.0; 4];
        for d in &per_draw {
            for c in 0..4 {
                cells[c] += d[c] / per_draw.len() as f64;
            }
        }
        out.push(ClassProbRow {
            profile: profile.name.clone(),
            cells,
            p_g: cells[2] + cells[3],
            p_r: cells[1] + cells[3],
            odds_ratio: cells[0] * cells[3] / (cells[1] * cells[2]),
        });
    }
    Ok(out)
}

pub fn render_correlations(rows: &[CorrelationRow]) -> String {
    let pw = rows.iter().map(|r| r.profile.len()).max().unwrap_or(7).max(7);
    let qw = rows.iter().map(|r| r.pair.len()).max().unwrap_or(4).max(4);
    let mut s = format!("{:<pw$} {:<qw$} {:>8} {:>8} {:>8}\n", "profile", "pair", "mean", "2.5%", "97.5%");
    for r in rows {
        s.push_str(&format!(
            "{:<pw$} {:<qw$} {:>8.3} {:>8.3} {:>8.3}\n",
            r.profile, r.pair, r.mean, r.lower, r.upper
        ));
    }
    s
}

pub fn render_class_probs(rows: &[ClassProbRow]) -> String {
    let pw = rows.iter().map(|r| r.profile.len()).max().unwrap_or(7).max(7);
    let mut s = format!(
        "{:<pw$} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "profile", "00", "01", "10", "11", "p(G)", "p(R)", "OR"
    );
    for r in rows {
        s.push_str(&format!("{:<pw$}", r.profile));
        for v in r.cells.iter().chain([&r.p_g, &r.p_r, &r.odds_ratio]) {
            s.push_str(&format!(" {v:>7.3}"));
        }
        s.push('\n');
    }
    s
}
