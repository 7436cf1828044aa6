use gnnctl::analysis::{
    c_t, deviation_bound, deviation_limit_check, stability_change_bound, stability_constant,
    stability_report,
};
use gnnctl::controllers::{
    dare_residual, make_gnn_controller, make_open_loop_controller, make_optimal_controller,
    solve_dare, Controller,
};
use gnnctl::experiments::verify::{random_gnn, random_system};
use gnnctl::filters::default_interval;
use gnnctl::network::{perturb_system, sample_connected_system, CostSpec, DistributedSystem};
use gnnctl::numerics::{inf_norm, l21_norm, spectral_norm};
use gnnctl::simulation::{classify_stable, iss_check, rollout, Disturbance};
use gnnctl::{Matrix, RngStream};
use proptest::prelude::*;

/// `lim ‖M^k‖^{1/k}` estimated at a large power.
fn spectral_radius_estimate(m: &Matrix) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0;
    let k = 512;
    for _ in 1..k {
        p = p.matmul(m).unwrap();
        let s = p.frobenius();
        log_scale += s.ln();
        p = p.scale(1.0 / s);
    }
    ((log_scale + p.frobenius().ln()) / k as f64).exp()
}

fn scalar_system(a: f64, b: f64) -> DistributedSystem {
    let one = Matrix::scalar(1.0);
    DistributedSystem::new(
        Matrix::scalar(0.0),
        Matrix::scalar(a),
        one.clone(),
        Matrix::scalar(b),
        one,
    )
    .unwrap()
}

#[test]
fn scalar_dare_matches_quadratic_formula() {
    let one = Matrix::scalar(1.0);
    let sol = solve_dare(&Matrix::scalar(0.5), &one, &one, &one).unwrap();
    // p² − 0.25p − 1 = 0
    let p = (0.25 + 4.0625_f64.sqrt()) / 2.0;
    assert!((sol.p_mat[(0, 0)] - p).abs() < 1e-9);
    assert!((sol.gain[(0, 0)] - 0.5 * p / (1.0 + p)).abs() < 1e-9);
    assert!((sol.p_mat[(0, 0)] - 1.13278).abs() < 1e-5);
    assert!((sol.gain[(0, 0)] - 0.26556).abs() < 1e-5);

    let d = scalar_system(0.5, 1.0);
    let optim = make_optimal_controller(&d, &CostSpec::identity(1, 1)).unwrap();
    let u = optim.evaluate(&Matrix::scalar(1.0), &d.support).unwrap();
    assert!((u[(0, 0)] + 0.26556).abs() < 1e-5);
}

#[test]
fn dare_without_actuation_is_the_lyapunov_series() {
    let mut rng = RngStream::new(1, 0);
    let a = rng.normal_matrix(4, 4);
    let a = a.scale(0.8 / spectral_norm(&a).unwrap());
    let q = Matrix::identity(4);
    let sol = solve_dare(&a, &Matrix::zeros(4, 1), &q, &Matrix::scalar(1.0)).unwrap();
    let mut want = Matrix::zeros(4, 4);
    let mut term = q.clone();
    for _ in 0..400 {
        want = &want + &term;
        term = a.t_matmul(&term.matmul(&a).unwrap()).unwrap();
    }
    assert!((&sol.p_mat - &want).max_abs() < 1e-8 * want.max_abs());
    assert_eq!(sol.gain.max_abs(), 0.0);
}

#[test]
fn dare_on_network_systems_is_stabilising() {
    for (seed, a_norm) in [(2, 0.995), (3, 1.05), (4, 1.2)] {
        let (_, d) =
            sample_connected_system(20, 5, a_norm, 1.0, &mut RngStream::new(seed, 0)).unwrap();
        let (q, r) = (Matrix::identity(20), Matrix::identity(20));
        let sol = solve_dare(&d.sys_graph, &d.ctrl_graph, &q, &r).unwrap();
        assert!(sol.residual < 1e-9);
        assert!(dare_residual(&d.sys_graph, &d.ctrl_graph, &q, &r, &sol.p_mat).unwrap() < 1e-9);
        assert!(sol.p_mat.is_symmetric(1e-10));
        let closed = &d.sys_graph - &d.ctrl_graph.matmul(&sol.gain).unwrap();
        assert!(spectral_radius_estimate(&closed) < 1.0, "a_norm {a_norm}");
    }
}

#[test]
fn dare_reports_non_stabilisable_pairs() {
    let a = Matrix::from_diag(&[2.0, 0.5]);
    let b = Matrix::column_vector(&[0.0, 1.0]);
    assert!(solve_dare(&a, &b, &Matrix::identity(2), &Matrix::scalar(1.0)).is_err());
}

#[test]
fn optimal_cost_matches_value_function_at_fifty_steps() {
    let cost = CostSpec::identity(1, 1);
    let mut within = 0;
    for seed in 0..10 {
        let mut rng = RngStream::new(100 + seed, 0);
        let (_, d) = sample_connected_system(20, 5, 0.995, 1.0, &mut rng).unwrap();
        let optim = make_optimal_controller(&d, &cost).unwrap();
        let x0 = rng.normal_matrix(20, 1);
        let rec = rollout(&d, &optim, &x0, 50, &cost, None).unwrap();
        let p = optim.value_matrix.as_ref().unwrap();
        let value = x0.dot(&p.matmul(&x0).unwrap());
        assert!(rec.total_cost <= value * (1.0 + 1e-12));
        if rec.total_cost >= 0.99 * value {
            within += 1;
        }
        let long = rollout(&d, &optim, &x0, 2000, &cost, None).unwrap();
        assert!((long.total_cost - value).abs() < 1e-8 * value);
    }
    assert!(within >= 8, "only {within}/10 systems within 1% at T = 50");
}

#[test]
fn geometric_series_cost() {
    let d = scalar_system(0.5, 0.0);
    let rec = rollout(
        &d,
        &make_open_loop_controller(1),
        &Matrix::scalar(1.0),
        50,
        &CostSpec::identity(1, 1),
        None,
    )
    .unwrap();
    assert!((rec.total_cost - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(rec.states.len(), 51);
    assert_eq!(rec.controls.len(), 50);
    assert!(rec.stable);
}

#[test]
fn zero_state_stays_at_zero() {
    let mut rng = RngStream::new(5, 0);
    let (_, d) = sample_connected_system(10, 3, 1.05, 1.0, &mut rng).unwrap();
    let gnn = make_gnn_controller(1, 4, 2, (-1.0, 1.0), &mut rng).unwrap();
    let rec = rollout(
        &d,
        &gnn,
        &Matrix::zeros(10, 1),
        20,
        &CostSpec::identity(1, 1),
        None,
    )
    .unwrap();
    assert_eq!(rec.total_cost, 0.0);
    assert!(rec.states.iter().all(|x| x.max_abs() == 0.0));
    assert!(rec.stable);
}

#[test]
fn open_loop_decays_below_unit_norm_and_grows_above() {
    let cost = CostSpec::identity(1, 1);
    let open = make_open_loop_controller(1);
    for seed in 0..5 {
        let mut rng = RngStream::new(6, seed);
        let g = gnnctl::network::generate_geometric_graph(50, 5, &mut rng).unwrap();
        let x0 = rng.normal_matrix(50, 1);
        let calm =
            gnnctl::network::generate_system(&g, 0.995, 1.0, 1, 1, &mut rng.fork(0, 0)).unwrap();
        let rec = rollout(&calm, &open, &x0, 50, &cost, None).unwrap();
        assert!(rec.state_norms[50] < rec.state_norms[0]);
        let wild =
            gnnctl::network::generate_system(&g, 1.01, 1.0, 1, 1, &mut rng.fork(0, 0)).unwrap();
        // A is symmetric with spectral norm 1.01, so the dominant mode grows
        let rec = rollout(&wild, &open, &x0, 2000, &cost, None).unwrap();
        assert!(rec.state_norms[2000] > rec.state_norms[1000]);
        assert!(!rec.stable);
    }
}

#[test]
fn record_invariants_and_disturbances() {
    let mut rng = RngStream::new(7, 0);
    let (_, d) = sample_connected_system(12, 3, 0.9, 1.0, &mut rng).unwrap();
    let gnn = make_gnn_controller(1, 4, 2, (-1.0, 1.0), &mut rng).unwrap();
    let x0 = rng.normal_matrix(12, 1);
    let cost = CostSpec::identity(1, 1);
    let plain = rollout(&d, &gnn, &x0, 30, &cost, None).unwrap();
    let sum: f64 = plain.step_costs.iter().sum();
    assert!((plain.total_cost - sum).abs() <= 1e-9 * sum);
    for (x, &n) in plain.states.iter().zip(&plain.state_norms) {
        assert_eq!(l21_norm(x), n);
    }

    let e0 = rng.normal_matrix(12, 1);
    let dist = Disturbance::geometric(&e0, 0.5, 30).unwrap();
    assert!((dist.summable_norm - l21_norm(&e0) * (1.0 - 0.5_f64.powi(30)) / 0.5).abs() < 1e-12);
    let pushed = rollout(&d, &gnn, &x0, 30, &cost, Some(&dist)).unwrap();
    let u0 = gnn.evaluate(&x0, &d.support).unwrap();
    assert!((&pushed.controls[0] - &(&u0 + &e0)).max_abs() < 1e-15);
    assert!(rollout(&d, &gnn, &x0, 31, &cost, Some(&dist)).is_err());
    assert!(rollout(&d, &gnn, &x0, 0, &cost, None).is_err());
    assert!(rollout(&d, &gnn, &Matrix::zeros(11, 1), 5, &cost, None).is_err());
}

#[test]
fn overflow_truncates_the_record() {
    let d = scalar_system(10.0, 0.0);
    let rec = rollout(
        &d,
        &make_open_loop_controller(1),
        &Matrix::scalar(1.0),
        100,
        &CostSpec::identity(1, 1),
        None,
    )
    .unwrap();
    assert_eq!(rec.diverged_at, Some(13));
    assert!(!rec.stable);
    assert!(!classify_stable(&rec));
    assert_eq!(rec.states.len(), 13);
}

#[test]
fn stability_constant_matches_its_definition() {
    let mut rng = RngStream::new(8, 0);
    for _ in 0..10 {
        let d = random_system(&mut rng, 8, 2, 1, 0.7).unwrap();
        let p = random_gnn(&mut rng, 2, 1, default_interval(&[&d.support]).unwrap()).unwrap();
        let c_phi: f64 = p
            .layers()
            .iter()
            .map(gnnctl::filters::filter_size)
            .product();
        let want = spectral_norm(&d.sys_graph).unwrap() * inf_norm(&d.sys_feat)
            + c_phi * spectral_norm(&d.ctrl_graph).unwrap() * inf_norm(&d.ctrl_feat);
        let xi = stability_constant(&d, &p).unwrap();
        assert!((xi - want).abs() < 1e-12 * want);
        let report = stability_report(&d, &p).unwrap();
        assert_eq!(report.is_sufficiently_stable, xi < 1.0);
        assert_eq!(report.beta1.is_some(), xi < 1.0);
        if let Some(f) = report.beta0_factor {
            assert!((f - 1.0 / (1.0 - xi)).abs() < 1e-12 * f);
        }
    }
}

#[test]
fn c_t_sequence() {
    assert_eq!(c_t(0, 0.5), 0.0);
    assert_eq!(c_t(1, 0.5), 1.0);
    assert!((c_t(3, 0.5) - 0.75).abs() < 1e-15);
    // maximised near t = −1/ln m, bounded by −1/(e m ln m)
    let m: f64 = 0.9;
    let peak = (0..200).map(|t| c_t(t, m)).fold(0.0, f64::max);
    assert!(peak <= -1.0 / (std::f64::consts::E * m * m.ln()));
}

#[test]
fn perturbation_bounds_hold_on_stable_pairs() {
    let mut rng = RngStream::new(9, 0);
    let mut checked = 0;
    while checked < 10 {
        let d = random_system(&mut rng, 10, 1, 1, 0.3).unwrap();
        let p = random_gnn(&mut rng, 1, 1, default_interval(&[&d.support]).unwrap()).unwrap();
        let dh = perturb_system(&d, 1e-3, &mut rng).unwrap();
        let change = stability_change_bound(&d, &dh, &p).unwrap();
        assert!(change.holds);
        assert!((change.lhs - (change.xi - change.xi_hat).abs()).abs() < 1e-15);
        if change.xi >= 1.0 || change.xi_hat >= 1.0 {
            continue;
        }
        let x0 = rng.normal_matrix(10, 1);
        let dev = deviation_bound(&d, &dh, &p, &x0, 40).unwrap();
        assert!(dev.holds_with(1.1), "worst ratio {}", dev.worst_ratio());
        assert_eq!(dev.empirical_deviation[0], 0.0);
        assert!(!dev.weak);
        let c = dev.cor_c.unwrap();
        let peak = dev.bound.iter().cloned().fold(0.0, f64::max);
        assert!(peak <= c * l21_norm(&x0) * dev.distance * (1.0 + 1e-12));
        assert!(deviation_limit_check(&d, &dh, &p, &x0, 500).unwrap());
        checked += 1;
    }
}

#[test]
fn input_state_bound_on_a_contracting_pair() {
    let mut rng = RngStream::new(10, 0);
    let d = random_system(&mut rng, 10, 1, 1, 0.4).unwrap();
    let mut p = random_gnn(&mut rng, 1, 1, default_interval(&[&d.support]).unwrap()).unwrap();
    let xi = stability_constant(&d, &p).unwrap();
    if xi >= 0.9 {
        let target = 0.8;
        let factor = (target - 0.4) / (xi - 0.4);
        for t in p.layers_mut()[0].taps_mut() {
            *t = t.scale(factor);
        }
    }
    assert!(stability_constant(&d, &p).unwrap() < 0.9);
    let x0 = rng.normal_matrix(10, 1);
    let dist = Disturbance::geometric(&rng.normal_matrix(10, 1), 0.9, 60).unwrap();
    let (lhs, rhs, holds) = iss_check(&d, &p, &x0, &dist, 60).unwrap();
    assert!(holds && lhs <= rhs);

    let big = random_system(&mut rng, 10, 1, 1, 1.05).unwrap();
    assert!(iss_check(&big, &p, &x0, &dist, 60).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectory_record_is_consistent(seed in any::<u64>(), horizon in 1usize..40, a_norm in 0.5..1.1f64) {
        let mut rng = RngStream::new(seed, 0);
        let (_, d) = sample_connected_system(8, 3, a_norm, 1.0, &mut rng).unwrap();
        let gnn = make_gnn_controller(1, 3, 2, (-1.0, 1.0), &mut rng).unwrap();
        let rec = rollout(&d, &gnn, &rng.normal_matrix(8, 1), horizon, &CostSpec::identity(1, 1), None).unwrap();
        prop_assert_eq!(rec.states.len(), rec.controls.len() + 1);
        prop_assert_eq!(rec.step_costs.len(), horizon);
        prop_assert!(rec.total_cost >= 0.0);
        let sum: f64 = rec.step_costs.iter().sum();
        prop_assert!((rec.total_cost - sum).abs() <= 1e-9 * sum.max(1e-300));
    }
}
