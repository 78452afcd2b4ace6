//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary under `cargo test`. Failing criteria are reported
//! but only turn into a nonzero exit when `UPCA_ACCEPTANCE_STRICT=1`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use upca_core::datagen::{
    sample_observation_pattern, sample_sparse_permutation, sample_subspace, ObservationPattern,
};
use upca_core::stage2::{brute_force_slr, lsrf, sorting_em};
use upca_core::theory::{
    enumerate_unlabeled_factorizations, is_relaxed_slmf, max_scaled_residual,
    multisets_equal_via_power_sums, power_sum_residual, verify_theorem1, DEFAULT_MULTISET_TOL,
};
use upca_core::{DenseMatrix, OutlierModel, RestorationMethod, Snr, Stage1Method};
use upca_harness::grid::GridReport;
use upca_harness::images::{
    image_pipeline, synthetic_stack, ImagePipelineSettings, SyntheticStack,
};
use upca_harness::patches::{apply_patch_permutation, patch_permute};
use upca_harness::{run_phase_transition, run_stage2_grid, ExperimentGrid, SnrSetting};

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

fn cell_grid(r: usize, ratio: f64, alpha: f64) -> ExperimentGrid {
    ExperimentGrid {
        m: 50,
        n: 500,
        ranks: vec![r],
        outlier_ratios: vec![ratio],
        alphas: vec![alpha],
        trials: 10,
        master_seed: 0,
        ..ExperimentGrid::default()
    }
}

fn mean_theta(report: &GridReport) -> f64 {
    report.means()[0].theta_max_deg.unwrap_or(f64::NAN)
}

fn all_ok(report: &GridReport) -> bool {
    report.cells.iter().all(|c| c.is_ok())
}

fn headline_grid() -> ExperimentGrid {
    cell_grid(25, 0.7, 0.1)
}

fn criterion1() -> Line {
    let report = run_phase_transition(&headline_grid(), None).expect("valid grid");
    let theta = mean_theta(&report);
    let slowest = report.cells.iter().map(|c| c.wall_ms).max().unwrap_or(0);
    line(
        "1",
        all_ok(&report) && theta <= 1.0 && slowest <= 10_000,
        format!("DPCP-IRLS r=25 ratio=0.7 alpha=0.1: mean theta {theta:.3e} deg (<= 1), slowest trial {slowest} ms (<= 10000)"),
    )
}

fn criterion2() -> Line {
    let grid = ExperimentGrid {
        stage1_method: Stage1Method::Cop,
        ..cell_grid(49, 0.9, 0.2)
    };
    let report = run_phase_transition(&grid, None).expect("valid grid");
    let theta = mean_theta(&report);
    line(
        "2",
        all_ok(&report) && (68.0..=90.0).contains(&theta),
        format!("CoP r=49 ratio=0.9 alpha=0.2: mean theta {theta:.2} deg (in [68, 90])"),
    )
}

fn criterion3() -> Line {
    let mut parts = Vec::new();
    let mut pass = true;
    for method in [
        Stage1Method::DpcpIrls,
        Stage1Method::DpcpRsgm,
        Stage1Method::Cop,
    ] {
        let grid = ExperimentGrid {
            stage1_method: method,
            outlier_model: OutlierModel::Sphere,
            ..cell_grid(10, 0.3, 0.0)
        };
        let report = run_phase_transition(&grid, None).expect("valid grid");
        let theta = mean_theta(&report);
        pass &= all_ok(&report) && theta <= 2.0;
        parts.push(format!("{} {theta:.2e}", method.name()));
    }
    line(
        "3",
        pass,
        format!(
            "sphere outliers r=10 ratio=0.3, mean theta deg (<= 2): {}",
            parts.join(", ")
        ),
    )
}

struct Stage2Cell {
    alpha: f64,
    r: usize,
    method: RestorationMethod,
    limit: f64,
    report: GridReport,
}

fn stage2_grid(
    alpha: f64,
    r: usize,
    method: RestorationMethod,
    record_timing: bool,
) -> ExperimentGrid {
    ExperimentGrid {
        snr_db: SnrSetting(Snr::Db(40.0)),
        stage2_method: method,
        record_timing,
        ..cell_grid(r, 0.9, alpha)
    }
}

const STAGE2_CELLS: [(f64, usize, RestorationMethod, f64); 4] = [
    (0.1, 25, RestorationMethod::Lsrf, 0.06),
    (0.1, 25, RestorationMethod::L1rr, 0.05),
    (0.3, 9, RestorationMethod::Lsrf, 0.05),
    (0.3, 9, RestorationMethod::L1rr, 0.05),
];

fn criterion4() -> (Line, Vec<Stage2Cell>) {
    let start = Instant::now();
    let mut cells = Vec::new();
    for (alpha, r, method, limit) in STAGE2_CELLS {
        let report =
            run_stage2_grid(&stage2_grid(alpha, r, method, true), None).expect("valid grid");
        cells.push(Stage2Cell {
            alpha,
            r,
            method,
            limit,
            report,
        });
    }
    let secs = start.elapsed().as_secs_f64();
    let mut pass = secs <= 300.0;
    let mut parts = Vec::new();
    for c in &cells {
        let err = c.report.means()[0].rel_error.unwrap_or(f64::NAN);
        pass &= all_ok(&c.report) && err <= c.limit;
        parts.push(format!(
            "(a={}, r={}) {} {:.2}% (<= {}%)",
            c.alpha,
            c.r,
            c.method.name(),
            100.0 * err,
            100.0 * c.limit
        ));
    }
    (
        line(
            "4",
            pass,
            format!("{}; total {secs:.1} s (<= 300)", parts.join(", ")),
        ),
        cells,
    )
}

fn criterion5(cells: &[Stage2Cell]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut worst_theta = 0.0f64;
    for c in cells {
        let mean = &c.report.means()[0];
        let gap =
            (mean.rel_error.unwrap_or(f64::NAN) - mean.rel_error_oracle.unwrap_or(f64::NAN)).abs();
        pass &= gap <= 0.01;
        parts.push(format!(
            "(a={}, r={}) {} gap {:.2} pp",
            c.alpha,
            c.r,
            c.method.name(),
            100.0 * gap
        ));
        for cell in &c.report.cells {
            worst_theta = worst_theta.max(cell.theta_max_deg.unwrap_or(f64::NAN));
        }
    }
    pass &= worst_theta <= 2.0;
    line(
        "5",
        pass,
        format!(
            "{} (<= 1 pp); max theta(S_hat, S*) {worst_theta:.2} deg (<= 2)",
            parts.join(", ")
        ),
    )
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn low_rank(m: usize, n: usize, r: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_matrix(gaussian(m, r, rng) * gaussian(r, n, rng)).expect("finite")
}

fn criterion6() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, n, r) in [(3, 3, 1), (4, 3, 1), (4, 2, 2)] {
        let mut passed = 0;
        for _ in 0..20 {
            let x = low_rank(m, n, r, &mut rng);
            if verify_theorem1(&x, r).is_ok_and(|rep| rep.passed) {
                passed += 1;
            }
        }
        pass &= passed == 20;
        parts.push(format!("({m},{n},{r}) {passed}/20"));
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "6",
        pass && secs <= 60.0,
        format!(
            "rank minimality at global permutations: {}; {secs:.1} s (<= 60)",
            parts.join(", ")
        ),
    )
}

fn criterion7() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut good = 0;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = low_rank(3, 3, 1, &mut rng);
        let mut tilde = x.as_matrix().clone();
        for j in 0..3 {
            let p = sample_sparse_permutation(3, 1.0, rng.random())
                .unwrap()
                .permutation;
            tilde.set_column(j, &p.apply_vector(&x.column_vector(j)));
        }
        let tilde = DenseMatrix::from_matrix(tilde).unwrap();
        let Ok(out) = enumerate_unlabeled_factorizations(&tilde, 1) else {
            continue;
        };
        let residual = out
            .solutions
            .iter()
            .map(|s| {
                max_scaled_residual(
                    &power_sum_residual(&s.factorization, &tilde).unwrap(),
                    &tilde,
                )
            })
            .fold(0.0, f64::max);
        worst = worst.max(residual);
        if out.solutions.len() == 6 && residual <= 1e-8 {
            good += 1;
        }
    }
    line(
        "7",
        good == 10,
        format!("(3,3,1) enumeration: {good}/10 seeds with exactly 6 solutions, max scaled residual {worst:.1e} (<= 1e-8)"),
    )
}

fn criterion8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let quarter = |rng: &mut ChaCha8Rng| rng.random_range(-40i32..=40) as f64 / 4.0;
    let mut disagreements = 0;
    for _ in 0..10_000 {
        let m = rng.random_range(1..=8);
        let a: Vec<f64> = (0..m).map(|_| quarter(&mut rng)).collect();
        let mut b = a.clone();
        match rng.random_range(0..3) {
            0 => {
                for i in (1..m).rev() {
                    b.swap(i, rng.random_range(0..=i));
                }
            }
            1 => b[rng.random_range(0..m)] = quarter(&mut rng),
            _ => b.iter_mut().for_each(|v| *v = quarter(&mut rng)),
        }
        let sorted = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        let oracle = sorted(&a) == sorted(&b);
        if multisets_equal_via_power_sums(&a, &b, DEFAULT_MULTISET_TOL).ok() != Some(oracle) {
            disagreements += 1;
        }
    }
    line(
        "8",
        disagreements == 0,
        format!("10000 fuzzed multiset pairs: {disagreements} disagreements with sort-and-compare"),
    )
}

fn slmf_reference(m: usize, omegas: &[Vec<usize>], r: usize) -> bool {
    let sets: Vec<BTreeSet<usize>> = omegas.iter().map(|w| w.iter().copied().collect()).collect();
    let lhs = |rows: &BTreeSet<usize>| -> usize {
        sets.iter()
            .map(|w| w.intersection(rows).count().saturating_sub(r))
            .sum()
    };
    if m < r || lhs(&(0..m).collect()) != m - r {
        return false;
    }
    (0u64..1 << m).all(|bits| {
        let rows: BTreeSet<usize> = (0..m).filter(|i| bits >> i & 1 == 1).collect();
        rows.len() <= r || lhs(&rows) <= rows.len() - r
    })
}

fn criterion9() -> Line {
    let holds = |p: &ObservationPattern, r| is_relaxed_slmf(p, r).map(|c| c.holds).ok();
    let single = holds(&ObservationPattern::full(6, 1), 2) == Some(true);
    let double = holds(&ObservationPattern::full(6, 2), 2) == Some(false);
    let exact: Vec<Vec<usize>> = (0..6).map(|j| vec![j, (j + 1) % 6]).collect();
    let exact_r = holds(&ObservationPattern::new(6, exact).unwrap(), 2) == Some(false);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agree = 0;
    for _ in 0..50 {
        let m = rng.random_range(3..=10);
        let r = rng.random_range(1..m);
        let n = rng.random_range(1..=5);
        let k = rng.random_range(r..=m);
        let p = sample_observation_pattern(m, n, k, rng.random()).unwrap();
        if holds(&p, r) == Some(slmf_reference(m, p.omegas(), r)) {
            agree += 1;
        }
    }
    line(
        "9",
        single && double && exact_r && agree == 50,
        format!(
            "verdicts as expected: one full column (holds) {single}, two full columns (fails) {double}, all #omega_j = r (fails) {exact_r}; random patterns agreeing {agree}/50"
        ),
    )
}

fn criterion10() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut matched, mut beaten) = (0, 0);
    for t in 0..50u64 {
        let basis = sample_subspace(6, 2, rng.random()).unwrap();
        let theta = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        let p = sample_sparse_permutation(6, 0.5, rng.random())
            .unwrap()
            .permutation;
        let x = p.apply_vector(&(basis.matrix() * theta));
        let brute = brute_force_slr(&x, &basis).unwrap();
        let em = sorting_em(&x, &basis, 100, 1000, t).unwrap();
        if (em.objective - brute.objective).abs() <= 1e-8 {
            matched += 1;
        }
        if em.objective < brute.objective - 1e-12 {
            beaten += 1;
        }
    }
    let basis = sample_subspace(50, 10, rng.random()).unwrap();
    let mut exact = 0;
    for _ in 0..100 {
        let theta = DVector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
        let x = basis.matrix() * theta;
        let p = sample_sparse_permutation(50, 0.1, rng.random())
            .unwrap()
            .permutation;
        let res = lsrf(&p.apply_vector(&x), &basis).unwrap();
        if (&res.x_hat - &x).norm() / x.norm() <= 1e-6 {
            exact += 1;
        }
    }
    line(
        "10",
        matched >= 40 && beaten == 0 && exact >= 90,
        format!("sorting-EM matches brute force {matched}/50 (>= 40), beats it {beaten} times (0); LSRF exact {exact}/100 (>= 90)"),
    )
}

fn criterion11() -> Line {
    let untimed = ExperimentGrid {
        record_timing: false,
        ..headline_grid()
    };
    let a = run_phase_transition(&untimed, None).unwrap().csv();
    let b = run_phase_transition(&untimed, Some(1)).unwrap().csv();
    let mut same = a == b;
    for (alpha, r, method, _) in STAGE2_CELLS {
        let grid = stage2_grid(alpha, r, method, false);
        let a = run_stage2_grid(&grid, None).unwrap().csv();
        let b = run_stage2_grid(&grid, Some(2)).unwrap().csv();
        same &= a == b;
    }
    line(
        "11",
        same,
        "criterion 1 and 4 grids rerun with the same master seed (different worker counts): CSVs byte-identical".into(),
    )
}

fn image_analogue() -> Line {
    let cfg = SyntheticStack::default();
    let (clean, corrupted, _) = synthetic_stack(&cfg).unwrap();
    let settings = ImagePipelineSettings {
        r: cfg.rank,
        patch: cfg.patch,
        stage2_method: RestorationMethod::Lsrf,
        dpcp: Default::default(),
        restore: Default::default(),
    };
    let err = image_pipeline(&corrupted, Some(&clean), &settings)
        .ok()
        .and_then(|(_, rep)| rep.rel_error)
        .unwrap_or(f64::NAN);
    let img = &clean.images[0];
    let (moved, p) = patch_permute(img, cfg.patch, 0.5, 1).unwrap();
    let round_trip = apply_patch_permutation(&moved, cfg.patch, &p.inverse()).unwrap() == *img;
    let identity = patch_permute(img, cfg.patch, 0.0, 1).unwrap().0 == *img;
    line(
        "image",
        err <= 0.05 && round_trip && identity,
        format!("rank-4 stack, 16 of 64 patch-permuted: lsrf rel_error {:.2}% (<= 5%); inverse round trip {round_trip}; alpha 0 identity {identity}", 100.0 * err),
    )
}

fn main() -> ExitCode {
    let strict = std::env::var("UPCA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut lines = vec![criterion1(), criterion2(), criterion3()];
    let (c4, cells) = criterion4();
    lines.push(c4);
    lines.push(criterion5(&cells));
    lines.extend([
        criterion6(),
        criterion7(),
        criterion8(),
        criterion9(),
        criterion10(),
        criterion11(),
        image_analogue(),
    ]);
    for l in &lines {
        println!(
            "{} criterion {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.detail
        );
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if strict && passed < lines.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
