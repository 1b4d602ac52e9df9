mod support;

use support::expr::{formulas, rel_err, Env};
use tmformer::bounds::{self, FunctionTable, ModelCapacity};
use tmformer::cli::{linear_class_bound, linear_class_table};
use tmformer::propagation::{self, ErrorLedger};

#[test]
fn unit_capacity_needs_nine_samples() {
    let sc = bounds::sample_complexity_next_token(&ModelCapacity::unit(), 1.0, (-2f64).exp()).unwrap();
    assert!(rel_err(sc.m, 9.0) < 1e-14);
    assert!(rel_err(sc.terms.capacity, 4.0) < 1e-14);
    assert!(rel_err(sc.terms.mixed, 4.0) < 1e-14);
    assert!(rel_err(sc.terms.confidence, 1.0) < 1e-14);
}

#[test]
fn generalisation_hand_value() {
    let g = bounds::generalization_bound(&ModelCapacity::unit(), 0.0, 1, (-1f64).exp()).unwrap();
    assert!((g - (2.0 + 0.5f64.sqrt())).abs() < 1e-12);
}

#[test]
fn expression_tree_agrees_at_the_unit_point() {
    let cap = ModelCapacity::unit();
    let env: Env = [
        ("b_spec", 1.0),
        ("l_phi", 1.0),
        ("l_max", 1.0),
        ("r_x", 1.0),
        ("k", 1.0),
        ("loss_l", 1.0),
        ("loss_c", 1.0),
        ("m", 1.0),
        ("delta", (-2f64).exp()),
        ("eps", 1.0),
        ("emp", 0.0),
        ("t", 1.0),
        ("r", 1.0),
    ]
    .into_iter()
    .collect();
    assert!(rel_err(bounds::rademacher_bound(&cap, 1).unwrap(), formulas::rademacher().eval(&env)) < 1e-15);
    assert!(rel_err(bounds::bracket(&cap, (-2f64).exp()).unwrap().total(), formulas::bracket().eval(&env)) < 1e-15);
}

#[test]
fn optimal_rounds_is_the_sweep_argmin() {
    let cap = ModelCapacity { b_spec: 2.0, ..ModelCapacity::unit() };
    let opt = bounds::optimal_rounds(&cap, 0.5, 0.05, 20).unwrap();
    assert_eq!(opt.sweep.len(), 20);
    let (arg, _) = opt
        .sweep
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(opt.best_rounds, arg + 1);
    for (i, v) in opt.sweep.iter().enumerate() {
        let direct = bounds::sample_complexity_multiround(&cap, 0.5, 0.05, 20, i + 1).unwrap().m;
        assert_eq!(*v, direct);
    }
    let one = bounds::optimal_rounds(&cap, 0.5, 0.05, 1).unwrap();
    assert_eq!(one.best_rounds, 1);
}

#[test]
fn linear_class_estimates_stay_under_the_closed_form() {
    for seed in 0..100 {
        let (table, r_x) = linear_class_table(20, 4, 16, 1.0, seed).unwrap();
        let est = bounds::empirical_rademacher(&table, 500, seed).unwrap();
        let closed = linear_class_bound(1.0, r_x, 20).unwrap();
        assert!(est.mean <= closed + 3.0 * est.stderr, "seed {seed}: {} > {closed}", est.mean);
    }
}

#[test]
fn estimator_edge_classes() {
    let constants = FunctionTable::new(&[vec![-1.0, 1.0]]).unwrap();
    let e = bounds::empirical_rademacher(&constants, 1000, 7).unwrap();
    assert_eq!(e.mean, 1.0);
    assert_eq!(e.stderr, 0.0);
    let zero = FunctionTable::new(&vec![vec![0.0]; 5]).unwrap();
    assert_eq!(bounds::empirical_rademacher(&zero, 100, 7).unwrap().mean, 0.0);
}

#[test]
fn estimator_is_seed_deterministic() {
    let (table, _) = linear_class_table(50, 3, 10, 1.0, 3).unwrap();
    let a = bounds::empirical_rademacher(&table, 2000, 11).unwrap();
    let b = bounds::empirical_rademacher(&table, 2000, 11).unwrap();
    assert_eq!(a, b);
}

#[test]
fn propagation_hand_values() {
    let ledger = ErrorLedger::new(vec![0.5, 0.5], vec![1.0 / 3.0; 3], vec![0.6; 3], vec![0.4; 3]).unwrap();
    let cb = propagation::cumulative_bound(&ledger);
    let want = [7.0 / 12.0, 0.5, 1.0 / 3.0];
    for (g, w) in cb.big_lambda.iter().zip(want) {
        assert!((g - w).abs() < 1e-15);
    }
    assert!((cb.bound - 17.0 / 12.0).abs() < 1e-15);
    assert!((propagation::uniform_closed_form(0.5, 1.0, 1.0, 3).unwrap() - 4.25).abs() < 1e-14);
    let scan = propagation::divergence_scan(0.5, 1.0, 0.0, &[10, 100, 1000]).unwrap();
    assert!(scan.points.iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn lipschitz_bound_is_attained_at_the_clip() {
    let p = vec![0.01, 0.99];
    let report = bounds::ce_lipschitz_audit(0.01, &[(p, 0), (vec![0.5, 0.5], 1)]).unwrap();
    assert!((report.points[0].grad_norm - 100.0).abs() < 1e-12);
    assert!((report.points[0].loss + 0.01f64.ln()).abs() < 1e-15);
    assert!((report.points[1].grad_norm - 2.0).abs() < 1e-15);
    assert!(report.all_within_bounds());
    assert!(report.max_fd_relative_error() < 1e-4);
    assert!(bounds::ce_lipschitz_audit(0.01, &[(vec![0.005, 0.995], 0)]).is_err());
}
