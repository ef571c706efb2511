use super::{Dataset, ItemParams, ModelError, ModelSpec, StructuralParams, MISSING};
use crate::linalg::{cholesky_upper, spd_inverse_and_det, try_cholesky, Matrix};
use crate::special::{bvn_cdf, log_norm_cdf, norm_cdf, GaussHermite};

pub const DEFAULT_QUAD_NODES: usize = 8;

/// `Φ(τ + λη)`.
pub fn item_prob(tau: f64, lambda: f64, eta: f64) -> f64 {
    norm_cdf(tau + lambda * eta)
}

/// `Σ_j log P(Y_j | η)` over the observed items of one block.
pub fn block_log_prob(p: &ItemParams, items: &[i8], eta: f64) -> f64 {
    let mut out = 0.0;
    for (j, &y) in items.iter().enumerate() {
        if y == MISSING {
            continue;
        }
        let lin = p.tau[j] + p.lambda[j] * eta;
        out += log_norm_cdf(if y == 1 { lin } else { -lin });
    }
    out
}

/// Log cell probabilities `(00, 01, 10, 11)`; `gamma` rows are cells 01, 10, 11.
pub fn log_class_probs(gamma: &Matrix, x_class: &[f64]) -> [f64; 4] {
    let mut lin = [0.0; 4];
    for c in 1..4 {
        lin[c] = gamma.row(c - 1).iter().zip(x_class).map(|(g, x)| g * x).sum();
    }
    let top = lin.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + lin.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    lin.map(|v| v - lse)
}

pub fn class_probs(gamma: &Matrix, x_class: &[f64]) -> [f64; 4] {
    log_class_probs(gamma, x_class).map(f64::exp)
}

/// Mean `βᵀX` and covariance `S R(αᵀX) S` of `η` for one covariate row.
pub fn structural_moments(
    params: &StructuralParams,
    x_mean: &[f64],
    x_corr: &[f64],
) -> Result<(Vec<f64>, Matrix), ModelError> {
    let k = params.sigma.len();
    let mu: Vec<f64> = (0..k)
        .map(|d| (0..x_mean.len()).map(|r| params.beta[(r, d)] * x_mean[r]).sum())
        .collect();
    let r = params.alpha.correlations_at(x_corr).assemble();
    try_cholesky(&r)?;
    let s = &params.sigma;
    Ok((mu, Matrix::from_fn(k, k, |a, b| s[a] * r[(a, b)] * s[b])))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Log-likelihood contribution of unit `i`, integrating `η` and summing over
/// the four latent classes.
///
/// Multi-item dims are integrated by tensor-product Gauss–Hermite with
/// `nodes` per dimension after standardizing by the Cholesky factor of their
/// covariance; at most two single-item dims per class cell are handled in
/// closed form through their conditional normal given the multi-item dims.
pub fn unit_loglik(
    spec: &ModelSpec,
    phi: &[ItemParams],
    params: &StructuralParams,
    data: &Dataset,
    i: usize,
    nodes: &GaussHermite,
) -> Result<f64, ModelError> {
    let (mu, sigma) = structural_moments(params, data.x_mean().row(i), data.x_corr().row(i))?;
    let log_pi = log_class_probs(&params.gamma, data.x_class().row(i));
    let nz = data.nonzero(i);
    let items = data.items(i);
    let mut terms = Vec::with_capacity(4);
    for cell in 0..4 {
        let xi = [cell >> 1, cell & 1];
        if (0..2).any(|s| xi[s] == 0 && nz[s]) {
            continue;
        }
        let active: Vec<usize> = (0..spec.k()).filter(|&d| xi[spec.side_of(d)] == 1).collect();
        let mut t = log_pi[cell];
        if !active.is_empty() {
            t += log_integral(spec, phi, items, &mu, &sigma, &active, nodes)?;
        }
        terms.push(t);
    }
    Ok(log_sum_exp(&terms))
}

fn log_integral(
    spec: &ModelSpec,
    phi: &[ItemParams],
    items: &[i8],
    mu: &[f64],
    sigma: &Matrix,
    active: &[usize],
    nodes: &GaussHermite,
) -> Result<f64, ModelError> {
    let multi: Vec<usize> = active.iter().copied().filter(|&d| spec.dims()[d].is_multi_item()).collect();
    // single-item dims with an observed response, and the required sign
    let single: Vec<(usize, f64)> = active
        .iter()
        .copied()
        .filter(|&d| !spec.dims()[d].is_multi_item())
        .filter_map(|d| match items[spec.item_offset(d)] {
            MISSING => None,
            1 => Some((d, 1.0)),
            _ => Some((d, -1.0)),
        })
        .collect();
    if single.len() > 2 {
        return Err(ModelError::Unsupported(
            "more than two single-item dimensions in one class cell".into(),
        ));
    }
    let block = |d: usize| {
        let off = spec.item_offset(d);
        &items[off..off + spec.dims()[d].items]
    };

    let nm = multi.len();
    let nf = single.len();
    let sub = |rows: &[usize], cols: &[usize]| Matrix::from_fn(rows.len(), cols.len(), |a, b| sigma[(rows[a], cols[b])]);
    let f_idx: Vec<usize> = single.iter().map(|s| s.0).collect();

    // conditional of the single-item dims given the multi-item ones
    let (coef, cond_cov) = if nm == 0 {
        (Matrix::zeros(nf, 0), sub(&f_idx, &f_idx))
    } else {
        let (inv_mm, _) = spd_inverse_and_det(&sub(&multi, &multi))?;
        let s_fm = sub(&f_idx, &multi);
        let coef = s_fm.matmul(&inv_mm);
        let adj = coef.matmul(&s_fm.transpose());
        let s_ff = sub(&f_idx, &f_idx);
        (coef, Matrix::from_fn(nf, nf, |a, b| s_ff[(a, b)] - adj[(a, b)]))
    };
    let single_log_prob = |eta_m: &[f64]| -> f64 {
        let mut m = [0.0; 2];
        let mut sd = [0.0; 2];
        for (a, &(d, _)) in single.iter().enumerate() {
            m[a] = mu[d] + (0..nm).map(|b| coef[(a, b)] * (eta_m[b] - mu[multi[b]])).sum::<f64>();
            sd[a] = cond_cov[(a, a)].max(0.0).sqrt();
        }
        match nf {
            0 => 0.0,
            1 => log_norm_cdf(single[0].1 * m[0] / sd[0]),
            _ => {
                let r = cond_cov[(0, 1)] / (sd[0] * sd[1]);
                let (s0, s1) = (single[0].1, single[1].1);
                bvn_cdf(s0 * m[0] / sd[0], s1 * m[1] / sd[1], s0 * s1 * r).ln()
            }
        }
    };
    if nm == 0 {
        return Ok(single_log_prob(&[]));
    }

    let mut u = vec![0.0; nm * nm];
    let s_mm = sub(&multi, &multi);
    cholesky_upper(s_mm.as_slice(), &mut u, nm)?;
    let g = nodes.len();
    let total = g.pow(nm as u32);
    let mut idx = vec![0usize; nm];
    let mut z = vec![0.0; nm];
    let mut eta = vec![0.0; nm];
    let mut acc = Vec::with_capacity(total);
    for _ in 0..total {
        let mut lw = 0.0;
        for a in 0..nm {
            z[a] = nodes.nodes[idx[a]];
            lw += nodes.log_weights[idx[a]];
        }
        // η = μ + Uᵀ z
        for a in 0..nm {
            eta[a] = mu[multi[a]] + (0..=a).map(|b| u[b * nm + a] * z[b]).sum::<f64>();
        }
        for (a, &d) in multi.iter().enumerate() {
            lw += block_log_prob(&phi[d], block(d), eta[a]);
        }
        lw += single_log_prob(&eta);
        acc.push(lw);
        for a in 0..nm {
            idx[a] += 1;
            if idx[a] < g {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(log_sum_exp(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelSpecDoc, MeasurementParams};

    #[test]
    fn item_prob_examples() {
        assert_eq!(item_prob(0.0, 1.0, 0.0), 0.5);
        assert!((item_prob(1.02, 2.38, 0.0) - 0.846_135_769_627_265_2).abs() < 1e-12);
        let mut last = 0.0;
        for e in [-5.0, -1.0, 0.0, 1.0, 5.0, 30.0] {
            let p = item_prob(0.0, 1.0, e);
            assert!(p >= last);
            last = p;
        }
        assert!((last - 1.0).abs() < 1e-15);
    }

    #[test]
    fn class_prob_examples() {
        let g = Matrix::zeros(3, 1);
        assert_eq!(class_probs(&g, &[1.0]), [0.25; 4]);
        let g = Matrix::from_rows(&[vec![2f64.ln()], vec![0.0], vec![0.0]]);
        let p = class_probs(&g, &[1.0]);
        for (a, b) in p.iter().zip([0.2, 0.4, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = Matrix::from_rows(&[vec![50.0], vec![0.0], vec![0.0]]);
        let p = class_probs(&g, &[1.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[1] - 1.0).abs() < 1e-20 + 1e-15);
        let g = Matrix::from_rows(&[vec![700.0], vec![-700.0], vec![0.0]]);
        assert!((class_probs(&g, &[1.0]).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn toy_spec() -> ModelSpec {
        let doc: ModelSpecDoc = serde_json::from_str(
            r#"{
              "dims": [{"name":"GP","items":3},{"name":"RP","items":2},{"name":"GF","items":1}],
              "class_sides": [{"name":"G","dims":["GP","GF"]},{"name":"R","dims":["RP"]}],
              "covariates": ["const"],
              "mean_covariates": ["const"],
              "corr_covariates": ["const"],
              "class_covariates": ["const"]
            }"#,
        )
        .unwrap();
        ModelSpec::from_doc(doc).unwrap()
    }

    fn toy_phi() -> MeasurementParams {
        let mut m = MeasurementParams::default();
        m.dims.insert("GP".into(), ItemParams { tau: vec![0.0, 0.5, -0.4], lambda: vec![1.0, 1.6, 0.8] });
        m.dims.insert("RP".into(), ItemParams { tau: vec![0.0, 0.2], lambda: vec![1.0, 1.3] });
        m
    }

    #[test]
    fn moments_follow_srs() {
        let s = toy_spec();
        let mut p = StructuralParams::initial(&s);
        let (mu, sig) = structural_moments(&p, &[1.0], &[1.0]).unwrap();
        assert_eq!(mu, vec![0.0; 3]);
        assert_eq!(sig, Matrix::identity(3));
        p.sigma = vec![2.0, 1.5, 1.0];
        p.alpha.set(0, 0, 0.5);
        let (_, sig) = structural_moments(&p, &[1.0], &[1.0]).unwrap();
        assert_eq!(sig[(1, 0)], 2.0 * 0.5 * 1.5);
        assert_eq!(sig[(0, 0)], 4.0);
    }

    #[test]
    fn forced_zero_class_gives_zero_loglik() {
        let s = toy_spec();
        let phi = toy_phi().per_dim(&s).unwrap();
        let mut p = StructuralParams::initial(&s);
        for c in 0..3 {
            p.gamma[(c, 0)] = -800.0;
        }
        let data = Dataset::new(&s, vec![0; 6], Matrix::from_rows(&[vec![1.0]])).unwrap();
        let ll = unit_loglik(&s, &phi, &p, &data, 0, &GaussHermite::new(8)).unwrap();
        assert!(ll.abs() < 1e-12, "{ll}");

        // a giving response is impossible when both giving cells have zero mass
        let mut p2 = StructuralParams::initial(&s);
        p2.gamma[(1, 0)] = f64::NEG_INFINITY;
        p2.gamma[(2, 0)] = f64::NEG_INFINITY;
        let data = Dataset::new(&s, vec![1, 0, 0, 0, 0, 0], Matrix::from_rows(&[vec![1.0]])).unwrap();
        let ll = unit_loglik(&s, &phi, &p2, &data, 0, &GaussHermite::new(8)).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn missing_item_equals_deleted_item() {
        let s = toy_spec();
        let phi = toy_phi();
        let mut p = StructuralParams::initial(&s);
        p.alpha.set(0, 0, 0.3);
        p.alpha.set(1, 0, 0.2);
        p.beta[(0, 1)] = 0.4;
        let gh = GaussHermite::new(8);
        let data = Dataset::new(&s, vec![1, MISSING, 0, 0, 1, 1], Matrix::from_rows(&[vec![1.0]])).unwrap();
        let full = unit_loglik(&s, &phi.per_dim(&s).unwrap(), &p, &data, 0, &gh).unwrap();

        let mut doc = s.doc().clone();
        doc.dims[0].items = 2;
        let s2 = ModelSpec::from_doc(doc).unwrap();
        let mut phi2 = phi.clone();
        let gp = phi2.dims.get_mut("GP").unwrap();
        gp.tau.remove(1);
        gp.lambda.remove(1);
        let data2 = Dataset::new(&s2, vec![1, 0, 0, 1, 1], Matrix::from_rows(&[vec![1.0]])).unwrap();
        let reduced = unit_loglik(&s2, &phi2.per_dim(&s2).unwrap(), &p, &data2, 0, &gh).unwrap();
        assert_eq!(full, reduced);
    }
}
