mod common;

use corrgress::feasibility::{
    build_test_set, infeasible_points, is_feasible, rho_interval, rho_interval_by_determinants, AlphaMatrix,
    CovariateExpansion, Term, TestSet, TestSetRecipe, TestSetStrategy,
};
use corrgress::linalg::{try_cholesky, CorrelationVector, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn alpha_interval_agrees_with_a_grid_scan() {
    for seed in 0..200 {
        common::interval_oracle_case(seed).unwrap();
    }
}

/// Random feasible α for `pts`, shrunk toward 0 until it is.
fn feasible_alpha(k: usize, q: usize, pts: &TestSet, rng: &mut ChaCha8Rng) -> AlphaMatrix {
    let l = k * (k - 1) / 2;
    let mut a = AlphaMatrix::new(k, Matrix::from_fn(l, q, |_, _| rng.random_range(-0.6..0.6))).unwrap();
    while !is_feasible(&a, pts) {
        a = AlphaMatrix::new(k, Matrix::from_fn(l, q, |r, c| 0.7 * a.get(r, c))).unwrap();
    }
    a
}

fn box_test_set(bounds: &[(f64, f64)], squares: bool) -> (CovariateExpansion, TestSet) {
    let p = bounds.len() + 1;
    let mut terms: Vec<Term> = (0..p).map(Term::Copy).collect();
    if squares {
        terms.extend((1..p).map(Term::Square));
    }
    let e = CovariateExpansion::new(p, terms).unwrap();
    let strategy = if squares {
        TestSetStrategy::QuadraticAugmented { bounds: bounds.to_vec() }
    } else {
        TestSetStrategy::Hyperrectangle { bounds: bounds.to_vec() }
    };
    let ts = build_test_set(&e, &Matrix::zeros(0, p), &strategy).unwrap();
    (e, ts)
}

fn random_base_point(bounds: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut z = vec![1.0];
    z.extend(bounds.iter().map(|&(l, u)| rng.random_range(l..=u)));
    z
}

#[test]
fn box_vertices_cover_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bounds = [(0.0, 1.0), (-1.0, 1.0), (-2.0, 0.5)];
    let (e, ts) = box_test_set(&bounds, false);
    assert_eq!(ts.len(), 8);
    assert_eq!(ts.recipe(), TestSetRecipe::HyperrectangleVertices);
    for _ in 0..50 {
        let alpha = feasible_alpha(4, 4, &ts, &mut rng);
        for _ in 0..100 {
            let x = e.expand(&random_base_point(&bounds, &mut rng));
            assert!(try_cholesky(&alpha.correlations_at(&x).assemble()).is_ok());
        }
    }
}

#[test]
fn augmented_set_covers_squared_covariates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bounds = [(-1.0, 2.0), (0.0, 1.0)];
    let (e, ts) = box_test_set(&bounds, true);
    // three abscissae per squared variable
    assert_eq!(ts.len(), 9);
    for _ in 0..50 {
        let alpha = feasible_alpha(3, 5, &ts, &mut rng);
        for _ in 0..100 {
            let x = e.expand(&random_base_point(&bounds, &mut rng));
            assert!(try_cholesky(&alpha.correlations_at(&x).assemble()).is_ok());
        }
    }
}

#[test]
fn vertices_of_a_box_refuse_nonlinear_terms() {
    let e = CovariateExpansion::new(2, vec![Term::Copy(0), Term::Copy(1), Term::Square(1)]).unwrap();
    let r = build_test_set(&e, &Matrix::zeros(0, 2), &TestSetStrategy::Hyperrectangle { bounds: vec![(0.0, 1.0)] });
    assert!(r.is_err());
    let e = CovariateExpansion::new(3, vec![Term::Copy(0), Term::Product(1, 2)]).unwrap();
    let r = build_test_set(
        &e,
        &Matrix::zeros(0, 3),
        &TestSetStrategy::QuadraticAugmented { bounds: vec![(0.0, 1.0), (0.0, 1.0)] },
    );
    assert!(r.is_err());
}

#[test]
fn observed_distinct_drops_duplicates() {
    let z = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![1.0, -0.0]]);
    let ts = build_test_set(&CovariateExpansion::identity(2), &z, &TestSetStrategy::ObservedDistinct).unwrap();
    assert_eq!(ts.len(), 2);
}

#[test]
fn csv_round_trip() {
    let (_, ts) = box_test_set(&[(0.1, 0.7), (-3.0, 1e-9)], false);
    let mut buf = Vec::new();
    ts.write_csv(&mut buf).unwrap();
    let back = TestSet::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.points(), ts.points());
    assert!(TestSet::read_csv("x0,x1\n1,abc\n".as_bytes()).is_err());
    assert!(TestSet::read_csv("x0,x1\n2,0\n".as_bytes()).is_err());
}

fn corr_vector(k: usize, vals: &[f64]) -> Option<CorrelationVector> {
    let l = k * (k - 1) / 2;
    let v = CorrelationVector::new(k, vals[..l].iter().map(|x| x * 0.9 / (k as f64 - 1.0)).collect()).ok()?;
    try_cholesky(&v.assemble()).ok()?;
    Some(v)
}

proptest! {
    #[test]
    fn cholesky_interval_matches_determinant_interval(
        k in 2usize..7,
        vals in proptest::collection::vec(-1.0f64..1.0, 15),
        pick in 0usize..15,
    ) {
        let Some(rho) = corr_vector(k, &vals) else { return Ok(()) };
        let l = pick % (k * (k - 1) / 2);
        let (k1, k2) = corrgress::linalg::PairLayout::new(k).position(l);
        let (g1, h1) = rho_interval_by_determinants(&rho, l).unwrap();
        let (g2, h2) = rho_interval(&try_cholesky(&rho.assemble()).unwrap(), k1, k2).unwrap();
        prop_assert!((g1 - g2).abs() < 1e-9 && (h1 - h2).abs() < 1e-9, "({g1}, {h1}) vs ({g2}, {h2})");
        // the current value lies inside and the endpoints are singular
        prop_assert!((rho.values()[l] - g2).abs() < h2);
        for end in [g2 - h2, g2 + h2] {
            let mut v = rho.values().to_vec();
            v[l] = end;
            let det = corrgress::linalg::assemble_matrix(k, &v).unwrap().determinant();
            prop_assert!(det.abs() < 1e-9, "det {det} at endpoint {end}");
        }
    }

    #[test]
    fn convex_combinations_stay_feasible(seed in 0u64..10_000, lambda in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..6);
        let q = rng.random_range(1..4);
        let t = if q == 1 { 1 } else { rng.random_range(1..15) };
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| std::iter::once(1.0).chain((1..q).map(|_| rng.random_range(-1.0..1.0))).collect())
            .collect();
        let ts = TestSet::from_points(Matrix::from_rows(&rows), TestSetRecipe::Explicit).unwrap();
        let a = feasible_alpha(k, q, &ts, &mut rng);
        let b = feasible_alpha(k, q, &ts, &mut rng);
        prop_assert!(is_feasible(&a.convex_combination(&b, lambda), &ts));
    }

    #[test]
    fn zero_alpha_is_always_feasible(q in 1usize..4, k in 2usize..8, xs in proptest::collection::vec(-5.0f64..5.0, 30)) {
        let rows: Vec<Vec<f64>> = xs.chunks(q).take(10).filter(|c| c.len() == q)
            .map(|c| std::iter::once(1.0).chain(c[1..].iter().copied()).collect())
            .collect();
        let Ok(ts) = TestSet::from_points(Matrix::from_rows(&rows), TestSetRecipe::Explicit) else { return Ok(()) };
        prop_assert!(infeasible_points(&AlphaMatrix::zeros(k, q), &ts).is_empty());
    }
}
