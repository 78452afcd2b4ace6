use nalgebra::DVector;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use upca_core::datagen::{
    generate, sample_sparse_permutation, sample_subspace, CorruptionSpec, OutlierModel,
    Permutation, Snr,
};
use upca_core::numerics::{max_angle_degrees, SubspaceBasis};
use upca_core::seed::rng_from_seed;
use upca_core::stage1::{dpcp_irls, estimate, DpcpConfig, Stage1Method};
use upca_core::stage2::{brute_force_slr, l1_rr, lsrf, sorting_em, RestorationResult};

fn column_in(basis: &SubspaceBasis, seed: u64) -> DVector<f64> {
    let mut rng = rng_from_seed(seed);
    let theta = DVector::from_fn(basis.dim(), |_, _| StandardNormal.sample(&mut rng));
    basis.matrix() * theta
}

fn in_span(basis: &SubspaceBasis, res: &RestorationResult) -> bool {
    let b = basis.matrix();
    (&res.x_hat - b * (b.transpose() * &res.x_hat)).norm() <= 1e-9 * res.x_hat.norm().max(1.0)
}

#[test]
fn stage1_is_equivariant_under_row_permutation() {
    let spec = CorruptionSpec {
        n_total: 200,
        n_out: 100,
        alpha: 0.3,
        snr: Snr::Noiseless,
        seed: 5,
        outlier_model: OutlierModel::Permuted,
    };
    let bundle = generate(20, 4, &spec).unwrap();
    let p = sample_sparse_permutation(20, 1.0, 9).unwrap().permutation;
    let moved =
        upca_core::DenseMatrix::from_matrix(p.apply_rows(bundle.x_tilde.as_matrix())).unwrap();
    for method in [
        Stage1Method::DpcpIrls,
        Stage1Method::DpcpRsgm,
        Stage1Method::Cop,
    ] {
        let a = estimate(&bundle.x_tilde, 4, method, &DpcpConfig::default()).unwrap();
        let b = estimate(&moved, 4, method, &DpcpConfig::default()).unwrap();
        let mapped = SubspaceBasis::orthonormalize(&p.apply_rows(a.s_hat.matrix())).unwrap();
        let theta = max_angle_degrees(&mapped, &b.s_hat).unwrap();
        assert!(theta < 1e-4, "{}: {theta}", method.name());
    }
}

#[test]
fn irls_objective_does_not_increase() {
    let spec = CorruptionSpec {
        n_total: 300,
        n_out: 200,
        alpha: 0.5,
        snr: Snr::Db(30.0),
        seed: 2,
        outlier_model: OutlierModel::Permuted,
    };
    let bundle = generate(30, 10, &spec).unwrap();
    let est = dpcp_irls(&bundle.x_tilde, 10, &DpcpConfig::default()).unwrap();
    for w in est.objective_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn em_never_beats_brute_force(m in 3usize..=6, r in 1usize..=2, seed in any::<u64>()) {
        let basis = sample_subspace(m, r, seed).unwrap();
        let x = sample_sparse_permutation(m, 0.5, seed ^ 1).unwrap().permutation.apply_vector(&column_in(&basis, seed ^ 2));
        let brute = brute_force_slr(&x, &basis).unwrap();
        let em = sorting_em(&x, &basis, 10, 100, seed).unwrap();
        prop_assert!(em.objective >= brute.objective - 1e-10);
        prop_assert!(in_span(&basis, &em) && in_span(&basis, &brute));
        let pi = brute.permutation.clone().unwrap();
        prop_assert!((pi.apply_vector(&brute.x_hat) - &x).norm() - brute.objective < 1e-9);
    }

    #[test]
    fn brute_force_ignores_input_order(m in 3usize..=6, seed in any::<u64>()) {
        let basis = sample_subspace(m, 2, seed).unwrap();
        let mut rng = rng_from_seed(seed ^ 3);
        let x = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let q = sample_sparse_permutation(m, 1.0, seed ^ 4).unwrap().permutation;
        let a = brute_force_slr(&x, &basis).unwrap();
        let b = brute_force_slr(&q.apply_vector(&x), &basis).unwrap();
        prop_assert!((a.objective - b.objective).abs() < 1e-10);
    }

    #[test]
    fn estimates_lie_in_the_subspace(m in 6usize..30, r in 1usize..5, seed in any::<u64>()) {
        let basis = sample_subspace(m, r, seed).unwrap();
        let mut rng = rng_from_seed(seed ^ 5);
        let x = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        prop_assert!(in_span(&basis, &lsrf(&x, &basis).unwrap()));
        prop_assert!(in_span(&basis, &l1_rr(&x, &basis, 1e-3).unwrap()));
    }

    #[test]
    fn lsrf_passes_inliers_through(m in 8usize..40, r in 1usize..6, seed in any::<u64>()) {
        let basis = sample_subspace(m, r, seed).unwrap();
        let x = column_in(&basis, seed);
        let res = lsrf(&x, &basis).unwrap();
        prop_assert!((&res.x_hat - &x).norm() <= 1e-9 * x.norm());
    }
}

#[test]
fn lsrf_recovers_sparse_permutations_exactly() {
    let basis = sample_subspace(50, 10, 11).unwrap();
    let mut exact = 0;
    for j in 0..100u64 {
        let x = column_in(&basis, 1000 + j);
        let p = sample_sparse_permutation(50, 0.1, 2000 + j)
            .unwrap()
            .permutation;
        let res = lsrf(&p.apply_vector(&x), &basis).unwrap();
        if (&res.x_hat - &x).norm() <= 1e-6 * x.norm() {
            exact += 1;
        }
    }
    assert!(exact >= 90, "{exact}/100 exact");
}

#[test]
fn em_matches_brute_force_on_small_columns() {
    let mut agree = 0;
    for t in 0..50u64 {
        let basis = sample_subspace(6, 2, t).unwrap();
        let p = sample_sparse_permutation(6, 0.5, 100 + t)
            .unwrap()
            .permutation;
        let x = p.apply_vector(&column_in(&basis, 200 + t));
        let brute = brute_force_slr(&x, &basis).unwrap();
        let em = sorting_em(&x, &basis, 100, 1000, t).unwrap();
        assert!(em.objective >= brute.objective - 1e-10);
        if (&em.x_hat - &brute.x_hat).amax() <= 1e-8 {
            agree += 1;
        }
    }
    assert!(agree >= 40, "{agree}/50 agree");
}

#[test]
fn identity_column_needs_no_permutation() {
    let basis = sample_subspace(5, 2, 1).unwrap();
    let x = column_in(&basis, 2);
    let res = brute_force_slr(&x, &basis).unwrap();
    assert!(res.objective < 1e-10);
    assert_eq!(res.permutation, Some(Permutation::identity(5)));
}
