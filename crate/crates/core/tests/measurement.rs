mod common;

use corrgress::measurement::{
    bfgs_maximize, fit_measurement, numeric_gradient, step1_loglik, BfgsOptions, SideData, Step1Params,
};

#[test]
fn recovers_item_parameters_quickly() {
    let t = common::step1_truth();
    let side = common::simulate_side(&t, 5000, 1, true);
    let start = std::time::Instant::now();
    let (est, report) = fit_measurement(&side, None, 32, 1e-5).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(report.converged, "{report:?}");
    assert!(report.gradient_norm < 1e-5);
    assert!(report.hessian_negative_definite);
    assert!(report.condition_number.is_finite() && report.condition_number >= 1.0);
    for it in 1..t.phi.tau.len() {
        assert!((est.phi.tau[it] - t.phi.tau[it]).abs() < 0.15, "tau {it}: {}", est.phi.tau[it]);
        assert!((est.phi.lambda[it] - t.phi.lambda[it]).abs() < 0.15, "lambda {it}: {}", est.phi.lambda[it]);
    }
    assert_eq!((est.phi.tau[0], est.phi.lambda[0]), (0.0, 1.0));
    assert!(secs < 120.0, "{secs} s");
}

#[test]
fn quadrature_converges_in_node_count() {
    let t = common::step1_truth();
    let side = common::simulate_side(&t, 2000, 2, true);
    let a = step1_loglik(&t, &side, 16).unwrap();
    let b = step1_loglik(&t, &side, 64).unwrap();
    assert!((a - b).abs() / 2000.0 < 1e-4, "{a} {b}");
}

#[test]
fn quadrature_matches_monte_carlo_per_unit() {
    for (quad, mc, se) in common::step1_quadrature_vs_monte_carlo(9) {
        assert!((quad - mc).abs() < 3.0 * se, "quad {quad} mc {mc} se {se}");
    }
}

#[test]
fn duplicated_data_doubles_loglik_and_keeps_estimates() {
    let t = common::step1_truth();
    let side = common::simulate_side(&t, 600, 3, false);
    let (a, ra) = fit_measurement(&side, None, 16, 1e-5).unwrap();
    let twice = side.stacked_twice();
    let (b, rb) = fit_measurement(&twice, Some(&a), 16, 1e-5).unwrap();
    assert!((rb.loglik - 2.0 * ra.loglik).abs() < 1e-8 * ra.loglik.abs(), "{} {}", rb.loglik, ra.loglik);
    for (x, y) in a.phi.tau.iter().zip(&b.phi.tau).chain(a.phi.lambda.iter().zip(&b.phi.lambda)) {
        assert!((x - y).abs() < 1e-4, "{x} {y}");
    }
    let ll = step1_loglik(&a, &twice, 16).unwrap();
    assert!((ll - 2.0 * ra.loglik).abs() < 1e-9 * ll.abs());
}

#[test]
fn optimizer_ascends_monotonically() {
    let t = common::step1_truth();
    let side = common::simulate_side(&t, 800, 4, true);
    let gh = 16;
    let f = |v: &[f64]| step1_loglik(&Step1Params::from_unconstrained(v, 6, true), &side, gh).unwrap();
    let r = bfgs_maximize(&f, Step1Params::initial(6).to_unconstrained(true), &BfgsOptions::default());
    assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    let g = numeric_gradient(&f, &r.x);
    assert!(g.iter().all(|v| v.abs() < 1e-5) || !r.converged);
}

#[test]
fn all_zero_data_pushes_class_probability_down() {
    let side = SideData::new(3, vec![0; 300], Some(vec![0; 100])).unwrap();
    let mut p = Step1Params::initial(3);
    let mut last = f64::NEG_INFINITY;
    for pi in [0.9, 0.5, 0.1, 0.01] {
        p.pi = pi;
        let ll = step1_loglik(&p, &side, 16).unwrap();
        assert!(ll.is_finite() && ll > last);
        last = ll;
    }
    assert!(fit_measurement(&side, None, 16, 1e-5).is_err());
}
