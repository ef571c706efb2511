#![allow(dead_code)]

use corrgress::feasibility::{TestSet, TestSetStrategy};
use corrgress::linalg::Matrix;
use corrgress::model::{
    simulate_dataset, Dataset, ItemParams, LatentState, MeasurementParams, ModelSpec, ModelSpecDoc, StructuralParams,
};
use corrgress::samplers::{derive_stream_id, RandomStream};

pub fn spec_from_json(json: &str) -> ModelSpec {
    let doc: ModelSpecDoc = serde_json::from_str(json).unwrap();
    ModelSpec::from_doc(doc).unwrap()
}

/// Two sides, each a 7-item block plus a single item, three covariates
/// (constant, binary, continuous on [-1, 1]) in every submodel.
pub fn survey_spec() -> ModelSpec {
    spec_from_json(
        r#"{
          "dims": [{"name":"GP","items":7},{"name":"GF","items":1},{"name":"RP","items":7},{"name":"RF","items":1}],
          "class_sides": [{"name":"G","dims":["GP","GF"]},{"name":"R","dims":["RP","RF"]}],
          "covariates": ["const","female","age"],
          "mean_covariates": ["const","female","age"],
          "corr_covariates": ["const","female","age"],
          "class_covariates": ["const","female","age"]
        }"#,
    )
}

pub fn survey_items() -> ItemParams {
    ItemParams {
        tau: vec![0.0, 1.0, -0.3, 0.5, -0.8, 0.2, 0.7],
        lambda: vec![1.0, 2.4, 1.2, 1.5, 0.8, 2.0, 1.1],
    }
}

pub fn survey_phi() -> MeasurementParams {
    let mut m = MeasurementParams::default();
    m.dims.insert("GP".into(), survey_items());
    m.dims.insert("RP".into(), survey_items());
    m
}

pub fn survey_truth(spec: &ModelSpec) -> StructuralParams {
    let mut p = StructuralParams::initial(spec);
    let beta = [[0.5, 0.2, -0.3, 0.0], [0.3, -0.3, 0.2, 0.4], [-0.2, 0.4, 0.3, -0.2]];
    for (m, row) in beta.iter().enumerate() {
        for (d, v) in row.iter().enumerate() {
            p.beta[(m, d)] = *v;
        }
    }
    p.sigma = vec![0.73, 1.0, 0.9, 1.0];
    let alpha = [
        [0.30, 0.10, -0.05],
        [0.38, -0.10, 0.05],
        [0.10, 0.05, 0.05],
        [0.10, 0.10, -0.05],
        [0.20, -0.05, 0.05],
        [0.30, 0.10, 0.05],
    ];
    for (l, row) in alpha.iter().enumerate() {
        for (m, v) in row.iter().enumerate() {
            p.alpha.set(l, m, *v);
        }
    }
    let gamma = [[-0.5, 0.3, 0.2], [0.0, -0.2, 0.1], [1.5, 0.4, -0.3]];
    for (c, row) in gamma.iter().enumerate() {
        for (r, v) in row.iter().enumerate() {
            p.gamma[(c, r)] = *v;
        }
    }
    p
}

/// Base covariates: constant, Bernoulli(1/2), Uniform(-1, 1).
pub fn survey_covariates(n: usize, seed: u64) -> Matrix {
    let mut st = RandomStream::new(seed, derive_stream_id(0, 250, 0));
    Matrix::from_fn(n, 3, |_, c| match c {
        0 => 1.0,
        1 => (st.uniform() < 0.5) as u8 as f64,
        _ => 2.0 * st.uniform() - 1.0,
    })
}

pub fn survey_test_set(spec: &ModelSpec, z: &Matrix) -> TestSet {
    let strategy = TestSetStrategy::Hyperrectangle {
        bounds: vec![(0.0, 1.0), (-1.0, 1.0)],
    };
    spec.corr_test_set(z, &strategy).unwrap()
}

pub struct SurveyData {
    pub spec: ModelSpec,
    pub phi: MeasurementParams,
    pub truth: StructuralParams,
    pub data: Dataset,
    pub latent: LatentState,
    pub test_set: TestSet,
}

pub fn survey_data(n: usize, seed: u64) -> SurveyData {
    let spec = survey_spec();
    let phi = survey_phi();
    let truth = survey_truth(&spec);
    let z = survey_covariates(n, seed);
    let (data, latent) = simulate_dataset(&spec, &phi, &truth, &z, seed).unwrap();
    let test_set = survey_test_set(&spec, &z);
    SurveyData {
        spec,
        phi,
        truth,
        data,
        latent,
        test_set,
    }
}

/// One-sample Kolmogorov-Smirnov p-value (asymptotic with the Stephens
/// small-sample correction).
pub fn ks_pvalue(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    if lam < 0.3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp();
    }
    p.clamp(0.0, 1.0)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// One random interval-oracle configuration at K = 4: a feasible `α` on up to
/// 20 test points with up to 3 covariates, one coefficient's interval checked
/// against a 1e-3 grid scan. Returns a description of the first mismatch.
pub fn interval_oracle_case(seed: u64) -> Result<(), String> {
    use corrgress::feasibility::{alpha_interval, is_feasible, test_point_factors, AlphaMatrix, TestSetRecipe};
    use rand::{Rng, SeedableRng};

    const STEP: f64 = 1e-3;
    const MAX_STEPS: usize = 100_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (k, q) = (4, rng.random_range(1..=3));
    // with the constant alone there is only one distinct point
    let t = if q == 1 { 1 } else { rng.random_range(1..=20) };
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|_| {
            let mut r = vec![1.0];
            // keep |x| away from 0 so every interval is short enough to scan
            r.extend((1..q).map(|_| rng.random_range(0.2..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }));
            r
        })
        .collect();
    let ts = TestSet::from_points(Matrix::from_rows(&rows), TestSetRecipe::Explicit).map_err(|e| e.to_string())?;
    let coeffs = Matrix::from_fn(6, q, |_, c| rng.random_range(-0.5..0.5) / if c == 0 { 1.0 } else { q as f64 });
    let mut alpha = AlphaMatrix::new(k, coeffs).map_err(|e| e.to_string())?;
    while !is_feasible(&alpha, &ts) {
        let scaled = Matrix::from_fn(6, q, |r, c| alpha.get(r, c) * 0.5);
        alpha = AlphaMatrix::new(k, scaled).map_err(|e| e.to_string())?;
    }
    let (l, m) = (rng.random_range(0..6), rng.random_range(0..q));
    let factors = test_point_factors(&alpha, &ts).map_err(|e| e.to_string())?;
    let iv = alpha_interval(&alpha, l, m, &ts, &factors).map_err(|e| e.to_string())?;
    let cur = alpha.get(l, m);
    let feasible_at = |v: f64| {
        let mut a = alpha.clone();
        a.set(l, m, v);
        is_feasible(&a, &ts)
    };
    // first infeasible grid point on each side of the current value
    let scan = |dir: f64| -> Result<f64, String> {
        (1..=MAX_STEPS)
            .map(|i| cur + dir * i as f64 * STEP)
            .find(|&v| !feasible_at(v))
            .ok_or_else(|| format!("seed {seed}: no infeasible point within {MAX_STEPS} steps"))
    };
    let (scan_lo, scan_hi) = (scan(-1.0)?, scan(1.0)?);
    let ctx = format!("seed {seed} (q={q}, T={t}, l={l}, m={m}): interval ({}, {}), scan ({scan_lo}, {scan_hi})", iv.lo, iv.hi);
    if !(iv.lo >= scan_lo - 1e-12 && iv.lo < scan_lo + STEP + 1e-12) || !(iv.hi <= scan_hi + 1e-12 && iv.hi > scan_hi - STEP - 1e-12) {
        return Err(format!("endpoint mismatch, {ctx}"));
    }
    for i in 0..25 {
        let v = iv.lo + (iv.hi - iv.lo) * (i as f64 + 0.5) / 25.0;
        if !feasible_at(v) {
            return Err(format!("interior point {v} infeasible, {ctx}"));
        }
    }
    if feasible_at(iv.lo - STEP) || feasible_at(iv.hi + STEP) {
        return Err(format!("exterior point feasible, {ctx}"));
    }
    Ok(())
}

struct Bounded {
    f: fn(f64) -> (f64, f64),
    lo: f64,
    hi: f64,
}

impl corrgress::samplers::LogDensity for Bounded {
    fn eval(&self, x: f64) -> (f64, f64) {
        (self.f)(x)
    }

    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// KS p-values of 10^4 adaptive-rejection draws from five log-concave
/// densities, each against its statrs cdf.
pub fn ars_ks_battery(seed: u64) -> Vec<(&'static str, f64)> {
    use corrgress::samplers::ars_sample;
    use statrs::distribution::{Beta, ContinuousCDF, Exp, Gamma, Normal};

    const N: usize = 10_000;
    let inf = f64::INFINITY;
    let normal = Normal::new(1.0, 2.0).unwrap();
    let exp = Exp::new(2.0).unwrap();
    let gamma = Gamma::new(3.0, 1.0).unwrap();
    let beta = Beta::new(2.0, 3.0).unwrap();
    let cases: Vec<(&'static str, Bounded, Vec<f64>, Box<dyn Fn(f64) -> f64>)> = vec![
        (
            "normal(1, 2)",
            Bounded { f: |x| (-(x - 1.0) * (x - 1.0) / 8.0, -(x - 1.0) / 4.0), lo: -inf, hi: inf },
            vec![-1.0, 3.0],
            Box::new(move |x| normal.cdf(x)),
        ),
        (
            "exponential(2)",
            Bounded { f: |x| (-2.0 * x, -2.0), lo: 0.0, hi: inf },
            vec![0.3, 1.0],
            Box::new(move |x| exp.cdf(x)),
        ),
        (
            "gamma(3, 1)",
            Bounded { f: |x| (2.0 * x.ln() - x, 2.0 / x - 1.0), lo: 0.0, hi: inf },
            vec![1.0, 4.0],
            Box::new(move |x| gamma.cdf(x)),
        ),
        (
            "logistic",
            Bounded {
                f: |x| (-x.abs() - 2.0 * (-x.abs()).exp().ln_1p(), -(0.5 * x).tanh()),
                lo: -inf,
                hi: inf,
            },
            vec![-2.0, 2.0],
            Box::new(|x| 1.0 / (1.0 + (-x).exp())),
        ),
        (
            "beta(2, 3)",
            Bounded { f: |x| (x.ln() + 2.0 * (1.0 - x).ln(), 1.0 / x - 2.0 / (1.0 - x)), lo: 0.0, hi: 1.0 },
            vec![0.2, 0.6],
            Box::new(move |x| beta.cdf(x)),
        ),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(c, (name, dens, init, cdf))| {
            let mut st = RandomStream::new(seed, derive_stream_id(0, 251, c as u64));
            let draws: Vec<f64> = (0..N).map(|_| ars_sample(&dens, &init, &mut st).unwrap()).collect();
            (name, ks_pvalue(&draws, cdf))
        })
        .collect()
}

/// KS p-values of 10^4 truncated normal draws for five regions: a half
/// line, an interval deep in one tail, the far tail beyond 8, a short
/// interval and one straddling the mean.
pub fn truncnorm_ks_battery(seed: u64) -> Vec<(String, f64)> {
    use corrgress::samplers::truncated_normal;
    use statrs::distribution::{ContinuousCDF, Normal};

    const N: usize = 10_000;
    let inf = f64::INFINITY;
    let cases = [
        (0.0, 1.0, 0.0, inf),
        (2.0, 0.5, -1.0, 1.0),
        (0.0, 1.0, 8.0, inf),
        (1.0, 3.0, -2.0, -1.9),
        (0.0, 1.0, -0.5, 0.5),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(c, &(mean, sd, lo, hi))| {
            let nd = Normal::new(mean, sd).unwrap();
            // survival form keeps the far tail accurate
            let (slo, shi) = (nd.sf(lo), nd.sf(hi));
            let cdf = |x: f64| (slo - nd.sf(x)) / (slo - shi);
            let mut st = RandomStream::new(seed, derive_stream_id(0, 252, c as u64));
            let draws: Vec<f64> = (0..N).map(|_| truncated_normal(mean, sd, lo, hi, &mut st).unwrap()).collect();
            (format!("N({mean}, {sd}) on ({lo}, {hi})"), ks_pvalue(&draws, cdf))
        })
        .collect()
}

pub fn step1_truth() -> corrgress::measurement::Step1Params {
    corrgress::measurement::Step1Params {
        phi: ItemParams {
            tau: vec![0.0, 1.0, -0.3, 0.5, -0.8, 0.2],
            lambda: vec![1.0, 2.4, 1.2, 1.5, 0.8, 2.0],
        },
        pi: 0.75,
        mu_p: 0.3,
        mu_f: 0.2,
        sigma2_p: 0.6,
        rho: 0.4,
    }
}

/// One class side: a block plus (optionally) a single item whose latent has
/// unit variance and correlation `rho` with the standardized block latent.
pub fn simulate_side(
    p: &corrgress::measurement::Step1Params,
    n: usize,
    seed: u64,
    with_single: bool,
) -> corrgress::measurement::SideData {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let j = p.phi.tau.len();
    let mut block = Vec::with_capacity(n * j);
    let mut single = Vec::with_capacity(n);
    for _ in 0..n {
        let on = rng.random::<f64>() < p.pi;
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let eta = p.mu_p + p.sigma2_p.sqrt() * z1;
        let eta_f = p.mu_f + p.rho * z1 + (1.0 - p.rho * p.rho).sqrt() * z2;
        for it in 0..j {
            let e: f64 = StandardNormal.sample(&mut rng);
            block.push((on && p.phi.tau[it] + p.phi.lambda[it] * eta + e > 0.0) as i8);
        }
        single.push((on && eta_f > 0.0) as i8);
    }
    corrgress::measurement::SideData::new(j, block, with_single.then_some(single)).unwrap()
}

/// Per-unit likelihood at 64 nodes against a 10^6-draw Monte Carlo
/// integral, for four response patterns. Returns `(quadrature, mc, mc_se)`.
pub fn step1_quadrature_vs_monte_carlo(seed: u64) -> Vec<(f64, f64, f64)> {
    use corrgress::measurement::{step1_loglik, SideData};
    use corrgress::model::MISSING;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ContinuousCDF, Normal};

    let t = step1_truth();
    let patterns: [(&[i8], i8); 4] = [
        (&[1, 1, 0, 1, 0, 1], 1),
        (&[0, 0, 0, 0, 0, 0], 0),
        (&[1, MISSING, 1, 1, 1, 1], 0),
        (&[0, 1, 0, MISSING, 0, 1], MISSING),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draws = 1_000_000;
    let normal = Normal::standard();
    let mut out = Vec::new();
    for (ys, yf) in patterns {
        let side = SideData::new(6, ys.to_vec(), Some(vec![yf])).unwrap();
        let quad = step1_loglik(&t, &side, 64).unwrap().exp();
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let eta = t.mu_p + t.sigma2_p.sqrt() * z1;
            let mut l = 1.0;
            for (it, &y) in ys.iter().enumerate() {
                let p = normal.cdf(t.phi.tau[it] + t.phi.lambda[it] * eta);
                match y {
                    1 => l *= p,
                    0 => l *= 1.0 - p,
                    _ => {}
                }
            }
            let pf = normal.cdf((t.mu_f + t.rho * z1) / (1.0 - t.rho * t.rho).sqrt());
            match yf {
                1 => l *= pf,
                0 => l *= 1.0 - pf,
                _ => {}
            }
            s += l;
            s2 += l * l;
        }
        let m = s / draws as f64;
        let se = ((s2 / draws as f64 - m * m) / draws as f64).sqrt();
        let zero = ys.iter().chain([&yf]).all(|&y| y != 1);
        out.push((quad, t.pi * m + if zero { 1.0 - t.pi } else { 0.0 }, t.pi * se));
    }
    out
}
