use super::{class_probs, structural_moments, Dataset, LatentState, MeasurementParams, ModelError, ModelSpec, StructuralParams, MISSING};
use crate::feasibility::{infeasible_points, TestSet, TestSetRecipe};
use crate::linalg::{cholesky_upper, Matrix};
use crate::samplers::{derive_stream_id, RandomStream};

const SIM_BLOCK: u64 = 200;
const MASK_BLOCK: u64 = 201;

/// Draws classes, latents and items for every row of `z` (base covariates,
/// constant first). Each unit uses its own stream, so the output depends on
/// `seed` only.
pub fn simulate_dataset(
    spec: &ModelSpec,
    phi: &MeasurementParams,
    params: &StructuralParams,
    z: &Matrix,
    seed: u64,
) -> Result<(Dataset, LatentState), ModelError> {
    let phi = phi.per_dim(spec)?;
    params.validate(spec)?;
    // reject infeasible α up front rather than at the first bad unit
    let placeholder = Dataset::new(spec, vec![0; z.rows() * spec.total_items()], z.clone())?;
    if placeholder.n() > 0 {
        let mut rows: Vec<Vec<f64>> = (0..placeholder.n()).map(|i| placeholder.x_corr().row(i).to_vec()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.dedup();
        let ts = TestSet::from_points(Matrix::from_rows(&rows), TestSetRecipe::ObservedDistinct)?;
        let bad = infeasible_points(&params.alpha, &ts);
        if !bad.is_empty() {
            return Err(ModelError::Params(format!(
                "alpha gives a non positive definite correlation matrix at {} covariate rows",
                bad.len()
            )));
        }
    }

    let n = z.rows();
    let k = spec.k();
    let t = spec.total_items();
    let mut items = vec![0i8; n * t];
    let mut xi = Vec::with_capacity(n);
    let mut eta = Matrix::zeros(n, k);
    let mut u = vec![0.0; k * k];
    for i in 0..n {
        let mut st = RandomStream::new(seed, derive_stream_id(0, SIM_BLOCK, i as u64));
        let pi = class_probs(&params.gamma, placeholder.x_class().row(i));
        let draw = st.uniform();
        let mut cell = 3;
        let mut acc = 0.0;
        for (c, p) in pi.iter().enumerate() {
            acc += p;
            if draw < acc {
                cell = c;
                break;
            }
        }
        let x = [(cell >> 1) as u8, (cell & 1) as u8];
        xi.push(x);

        let (mu, sigma) = structural_moments(params, placeholder.x_mean().row(i), placeholder.x_corr().row(i))?;
        cholesky_upper(sigma.as_slice(), &mut u, k)?;
        let e: Vec<f64> = (0..k).map(|_| st.normal()).collect();
        for a in 0..k {
            eta[(i, a)] = mu[a] + (0..=a).map(|b| u[b * k + a] * e[b]).sum::<f64>();
        }

        let row = &mut items[i * t..(i + 1) * t];
        for (d, dim) in spec.dims().iter().enumerate() {
            let off = spec.item_offset(d);
            let on = x[spec.side_of(d)] == 1;
            for j in 0..dim.items {
                // draw even when the side is off so streams stay aligned
                let w = st.uniform();
                row[off + j] = if !on {
                    0
                } else if dim.is_multi_item() {
                    let p = super::item_prob(phi[d].tau[j], phi[d].lambda[j], eta[(i, d)]);
                    (w < p) as i8
                } else {
                    (eta[(i, d)] > 0.0) as i8
                };
            }
        }
    }
    let data = Dataset::new(spec, items, z.clone())?;
    Ok((data, LatentState { xi, eta }))
}

/// Sets each item to missing independently with probability `rate`.
pub fn mask_missing(spec: &ModelSpec, data: &Dataset, rate: f64, seed: u64) -> Result<Dataset, ModelError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(ModelError::Params(format!("missing rate {rate} outside [0, 1)")));
    }
    let mut items = data.all_items().to_vec();
    let t = spec.total_items();
    for i in 0..data.n() {
        let mut st = RandomStream::new(seed, derive_stream_id(0, MASK_BLOCK, i as u64));
        for v in &mut items[i * t..(i + 1) * t] {
            if st.uniform() < rate {
                *v = MISSING;
            }
        }
    }
    Dataset::new(spec, items, data.z().clone())
}
