mod common;

use corrgress::linalg::Matrix;
use corrgress::model::{simulate_dataset, unit_loglik, Dataset, ItemParams, MeasurementParams, StructuralParams};
use corrgress::special::GaussHermite;

const MODEL: &str = r#"{
  "dims": [{"name":"A","items":2},{"name":"F","items":1},{"name":"B","items":2}],
  "class_sides": [{"name":"G","dims":["A","F"]},{"name":"R","dims":["B"]}],
  "covariates": ["const"],
  "mean_covariates": ["const"],
  "corr_covariates": ["const"],
  "class_covariates": ["const"]
}"#;

fn setup() -> (corrgress::model::ModelSpec, MeasurementParams, StructuralParams) {
    let spec = common::spec_from_json(MODEL);
    let mut phi = MeasurementParams::default();
    phi.dims.insert("A".into(), ItemParams { tau: vec![0.0, -0.4], lambda: vec![1.0, 1.6] });
    phi.dims.insert("B".into(), ItemParams { tau: vec![0.0, 0.5], lambda: vec![1.0, 0.7] });
    let mut p = StructuralParams::initial(&spec);
    p.beta[(0, 0)] = 0.3;
    p.beta[(0, 1)] = -0.5;
    p.beta[(0, 2)] = 0.4;
    p.sigma = vec![0.8, 1.0, 1.3];
    p.alpha.set(0, 0, 0.5);
    p.alpha.set(1, 0, -0.3);
    p.alpha.set(2, 0, 0.2);
    p.gamma[(0, 0)] = 0.4;
    p.gamma[(1, 0)] = -0.3;
    p.gamma[(2, 0)] = 1.1;
    (spec, phi, p)
}

fn pattern(code: usize) -> Vec<i8> {
    (0..5).map(|j| ((code >> j) & 1) as i8).collect()
}

#[test]
fn pattern_probabilities_sum_to_one() {
    let (spec, phi, p) = setup();
    let phi = phi.per_dim(&spec).unwrap();
    let gh = GaussHermite::new(20);
    let items: Vec<i8> = (0..32).flat_map(pattern).collect();
    let data = Dataset::new(&spec, items, Matrix::from_fn(32, 1, |_, _| 1.0)).unwrap();
    let total: f64 = (0..32).map(|i| unit_loglik(&spec, &phi, &p, &data, i, &gh).unwrap().exp()).sum();
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn pattern_probabilities_match_simulated_frequencies() {
    let (spec, phi, p) = setup();
    let n = 200_000;
    let (sim, _) = simulate_dataset(&spec, &phi, &p, &Matrix::from_fn(n, 1, |_, _| 1.0), 21).unwrap();
    let mut counts = [0usize; 32];
    for i in 0..n {
        let code: usize = sim.items(i).iter().enumerate().map(|(j, &y)| (y as usize) << j).sum();
        counts[code] += 1;
    }
    let per_dim = phi.per_dim(&spec).unwrap();
    let gh = GaussHermite::new(20);
    let items: Vec<i8> = (0..32).flat_map(pattern).collect();
    let data = Dataset::new(&spec, items, Matrix::from_fn(32, 1, |_, _| 1.0)).unwrap();
    for (code, &count) in counts.iter().enumerate() {
        let prob = unit_loglik(&spec, &per_dim, &p, &data, code, &gh).unwrap().exp();
        let freq = count as f64 / n as f64;
        let se = (prob * (1.0 - prob) / n as f64).sqrt();
        assert!((freq - prob).abs() < 4.5 * se + 1e-6, "pattern {code:05b}: {freq} vs {prob}");
    }
}

#[test]
fn more_nodes_do_not_move_the_likelihood() {
    let (spec, phi, p) = setup();
    let phi = phi.per_dim(&spec).unwrap();
    let data = Dataset::new(&spec, vec![1, 0, 1, 1, 1], Matrix::from_rows(&[vec![1.0]])).unwrap();
    let coarse = unit_loglik(&spec, &phi, &p, &data, 0, &GaussHermite::new(24)).unwrap();
    let fine = unit_loglik(&spec, &phi, &p, &data, 0, &GaussHermite::new(48)).unwrap();
    assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
}
