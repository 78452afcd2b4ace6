use upca_core::{RestorationMethod, Stage1Method};
use upca_wasm::{column_run, estimate_subspace_js, subspace_run, sweep};

#[test]
fn irls_recovers_small_instance() {
    let run = subspace_run(30, 200, 3, 0.3, 0.3, Stage1Method::DpcpIrls, 7).unwrap();
    assert!(run.theta_max_deg < 1e-3, "{}", run.theta_max_deg);
    assert!(run.realized_alpha > 0.0);
}

#[test]
fn sweep_shape_and_determinism() {
    let a = sweep(
        20,
        100,
        &[2, 10],
        &[0.1, 0.5, 0.9],
        0.2,
        2,
        Stage1Method::Cop,
        3,
    )
    .unwrap();
    let b = sweep(
        20,
        100,
        &[2, 10],
        &[0.1, 0.5, 0.9],
        0.2,
        2,
        Stage1Method::Cop,
        3,
    )
    .unwrap();
    assert_eq!(a.theta.len(), 2);
    assert!(a.theta.iter().all(|row| row.len() == 3));
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn column_restores_and_moves_only_support() {
    let run = column_run(20, 3, 0.3, RestorationMethod::Lsrf, 11).unwrap();
    assert!(run.rel_error < 1e-8, "{}", run.rel_error);
    let changed: Vec<usize> = (0..20)
        .filter(|&i| run.x_star[i] != run.x_tilde[i])
        .collect();
    assert!(changed.iter().all(|i| run.moved.contains(i)));

    let brute = column_run(6, 2, 0.5, RestorationMethod::BruteForce, 11).unwrap();
    assert!(brute.rel_error < 1e-8, "{}", brute.rel_error);
}

#[test]
fn rejects_oversized_input() {
    assert!(subspace_run(500, 100, 3, 0.1, 0.1, Stage1Method::Cop, 0).is_err());
}

#[test]
fn json_wrapper_returns_parseable_output() {
    let s = estimate_subspace_js(20, 100, 2, 0.2, 0.3, "irls", 1).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["method"], "dpcp-irls");
    assert!(v["theta_max_deg"].as_f64().unwrap() < 1.0);
}
