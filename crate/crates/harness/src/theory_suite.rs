//! Batch of exhaustive identifiability checks with a JSON report.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use upca_core::datagen::{sample_observation_pattern, sample_sparse_permutation};
use upca_core::seed::rng_from_seed;
use upca_core::theory::{
    canonical_factorization, check_umc_hypothesis, enumerate_unlabeled_factorizations,
    is_relaxed_slmf, max_scaled_residual, multisets_equal_via_power_sums, omega_power_sum_residual,
    power_sum_residual, verify_theorem1, DEFAULT_MULTISET_TOL, ENUMERATION_LIMIT,
};
use upca_core::{DenseMatrix, Error, ObservationPattern, Result};

/// Residual bound for exact solutions, relative to the power-sum scale.
const RESIDUAL_TOL: f64 = 1e-8;
/// Counterexamples quoted per failing instance.
const MAX_WITNESSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSize {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub instances: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySuiteConfig {
    pub master_seed: u64,
    pub rank_minimality: Vec<InstanceSize>,
    /// Adds the constant matrix and an `r = n` instance, which must fail.
    pub degenerate_cases: bool,
    pub enumeration: Vec<InstanceSize>,
    pub multiset_pairs: usize,
    pub slmf_random_patterns: usize,
    pub umc_random_patterns: usize,
    pub partial_power_sum_instances: usize,
}

impl Default for TheorySuiteConfig {
    fn default() -> Self {
        let size = |m, n, r, instances| InstanceSize { m, n, r, instances };
        Self {
            master_seed: 0,
            rank_minimality: vec![size(3, 3, 1, 20), size(4, 3, 1, 20)],
            degenerate_cases: true,
            enumeration: vec![size(3, 3, 1, 10)],
            multiset_pairs: 10_000,
            slmf_random_patterns: 50,
            umc_random_patterns: 20,
            partial_power_sum_instances: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub instance: Value,
    pub guards: Value,
    pub expected: Verdict,
    pub observed: Verdict,
    /// `observed == expected`.
    pub pass: bool,
    pub witnesses: Vec<Value>,
    pub margins: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryReport {
    pub pass: bool,
    pub checks_total: usize,
    pub checks_passed: usize,
    pub config: TheorySuiteConfig,
    pub checks: Vec<CheckReport>,
}

fn tuple_guard(m: usize, n: usize) -> Value {
    let per_column = (1..=m as u64).product::<u64>();
    let tuples = per_column.checked_pow(n as u32);
    json!({ "tuples": tuples, "limit": ENUMERATION_LIMIT })
}

fn check(name: &str, instance: Value, guards: Value) -> CheckReport {
    CheckReport {
        name: name.into(),
        instance,
        guards,
        expected: Verdict::Pass,
        observed: Verdict::Pass,
        pass: true,
        witnesses: Vec::new(),
        margins: json!({}),
        note: None,
    }
}

fn finish(mut c: CheckReport, observed_ok: bool) -> CheckReport {
    c.observed = Verdict::of(observed_ok);
    c.pass = c.observed == c.expected;
    c
}

fn guard_failure(mut c: CheckReport, err: Error) -> CheckReport {
    c.note = Some(err.to_string());
    if let Value::Object(map) = &mut c.guards {
        map.insert("violation".into(), Value::String(err.to_string()));
    }
    finish(c, false)
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn low_rank<R: Rng>(m: usize, n: usize, r: usize, rng: &mut R) -> Result<DenseMatrix> {
    DenseMatrix::from_matrix(gaussian_matrix(m, r, rng) * gaussian_matrix(r, n, rng))
}

fn rank_minimality(size: InstanceSize, seed: u64) -> CheckReport {
    let InstanceSize { m, n, r, instances } = size;
    let mut c = check(
        "rank_minimality",
        json!({ "m": m, "n": n, "r": r, "instances": instances }),
        tuple_guard(m, n),
    );
    let mut rng = rng_from_seed(seed);
    let (mut passed, mut min_excess, mut max_equality) = (0, f64::INFINITY, 0.0f64);
    for t in 0..instances {
        let outcome = low_rank(m, n, r, &mut rng).and_then(|x| verify_theorem1(&x, r));
        match outcome {
            Ok(rep) => {
                min_excess = min_excess.min(rep.min_excess_margin);
                max_equality = max_equality.max(rep.max_equality_margin);
                if rep.passed {
                    passed += 1;
                } else {
                    c.witnesses.push(json!({
                        "instance": t,
                        "min_rank_found": rep.min_rank_found,
                        "equality_tuples": rep.equality_tuples.len(),
                        "expected_equality_count": rep.expected_equality_count,
                        "counterexamples": rep.counterexamples.iter().take(MAX_WITNESSES).collect::<Vec<_>>(),
                    }));
                }
            }
            Err(e) => return guard_failure(c, e),
        }
    }
    c.margins = json!({
        "instances_passed": passed,
        "min_excess_margin": finite(min_excess),
        "max_equality_margin": max_equality,
    });
    finish(c, passed == instances)
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn degenerate_checks(seed: u64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let constant = DenseMatrix::from_matrix(DMatrix::from_element(3, 3, 1.5)).expect("finite");
    let mut rng = rng_from_seed(seed);
    let square = low_rank(4, 2, 2, &mut rng);
    let cases = [
        (
            "rank_minimality_constant",
            Ok(constant),
            1,
            "constant columns: every tuple leaves X* unchanged",
        ),
        (
            "rank_minimality_square",
            square,
            2,
            "r = n: every tuple has rank at most r",
        ),
    ];
    for (name, x, r, note) in cases {
        let x: DenseMatrix = match x {
            Ok(x) => x,
            Err(e) => {
                out.push(guard_failure(check(name, json!({}), json!({})), e));
                continue;
            }
        };
        let mut c = check(
            name,
            json!({ "m": x.rows(), "n": x.cols(), "r": r }),
            tuple_guard(x.rows(), x.cols()),
        );
        c.expected = Verdict::Fail;
        c.note = Some(note.into());
        match verify_theorem1(&x, r) {
            Ok(rep) => {
                c.margins = json!({
                    "min_rank_found": rep.min_rank_found,
                    "equality_tuples": rep.equality_tuples.len(),
                    "expected_equality_count": rep.expected_equality_count,
                });
                out.push(finish(c, rep.passed));
            }
            Err(e) => out.push(guard_failure(c, e)),
        }
    }
    out
}

fn column_shuffled<R: Rng>(x: &DenseMatrix, rng: &mut R) -> Result<DenseMatrix> {
    let m = x.rows();
    let mut out = x.as_matrix().clone();
    for j in 0..x.cols() {
        let p = sample_sparse_permutation(m, 1.0, rng.random())?.permutation;
        out.set_column(j, &p.apply_vector(&x.column_vector(j)));
    }
    DenseMatrix::from_matrix(out)
}

fn enumeration(size: InstanceSize, seed: u64) -> CheckReport {
    let InstanceSize { m, n, r, instances } = size;
    let expected = (1..=m).product::<usize>();
    let mut c = check(
        "unlabeled_enumeration",
        json!({ "m": m, "n": n, "r": r, "instances": instances, "expected_solutions": expected }),
        tuple_guard(m, n),
    );
    let mut rng = rng_from_seed(seed);
    let (mut passed, mut worst) = (0, 0.0f64);
    for t in 0..instances {
        let run = low_rank(m, n, r, &mut rng).and_then(|x| {
            let tilde = column_shuffled(&x, &mut rng)?;
            let out = enumerate_unlabeled_factorizations(&tilde, r)?;
            let mut residual = 0.0f64;
            for s in &out.solutions {
                let res = power_sum_residual(&s.factorization, &tilde)?;
                residual = residual.max(max_scaled_residual(&res, &tilde));
            }
            Ok((out, residual))
        });
        match run {
            Ok((out, residual)) => {
                worst = worst.max(residual);
                if out.solutions.len() == expected && residual <= RESIDUAL_TOL {
                    passed += 1;
                } else {
                    c.witnesses.push(json!({
                        "instance": t,
                        "solutions": out.solutions.len(),
                        "canonical_failures": out.canonical_failures.len(),
                        "max_scaled_residual": residual,
                    }));
                }
            }
            Err(e) => return guard_failure(c, e),
        }
    }
    c.margins = json!({ "instances_passed": passed, "max_scaled_residual": worst, "tolerance": RESIDUAL_TOL });
    finish(c, passed == instances)
}

fn quarter<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-40i32..=40) as f64 / 4.0
}

fn multiset_fuzz(pairs: usize, seed: u64) -> CheckReport {
    let mut c = check(
        "multiset_power_sums",
        json!({ "pairs": pairs, "values": "multiples of 0.25 in [-10, 10]", "max_len": 8 }),
        json!({ "tolerance": DEFAULT_MULTISET_TOL }),
    );
    let mut rng = rng_from_seed(seed);
    let (mut disagreements, mut equal) = (0usize, 0usize);
    for _ in 0..pairs {
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
        let sort = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        let oracle = sort(&a) == sort(&b);
        equal += oracle as usize;
        match multisets_equal_via_power_sums(&a, &b, DEFAULT_MULTISET_TOL) {
            Ok(got) if got == oracle => {}
            Ok(_) => {
                disagreements += 1;
                if c.witnesses.len() < MAX_WITNESSES {
                    c.witnesses
                        .push(json!({ "a": a, "b": b, "oracle": oracle }));
                }
            }
            Err(e) => return guard_failure(c, e),
        }
    }
    c.margins = json!({ "disagreements": disagreements, "equal_pairs": equal });
    finish(c, disagreements == 0)
}

/// The relaxed-SLMF definition evaluated over every row subset, on sets.
fn slmf_reference(m: usize, omegas: &[Vec<usize>], r: usize) -> bool {
    let sets: Vec<BTreeSet<usize>> = omegas.iter().map(|w| w.iter().copied().collect()).collect();
    let lhs = |rows: &BTreeSet<usize>| -> usize {
        sets.iter()
            .map(|w| w.intersection(rows).count().saturating_sub(r))
            .sum()
    };
    let all: BTreeSet<usize> = (0..m).collect();
    if m < r || lhs(&all) != m - r {
        return false;
    }
    (0u64..1 << m).all(|bits| {
        let rows: BTreeSet<usize> = (0..m).filter(|i| bits >> i & 1 == 1).collect();
        rows.len() <= r || lhs(&rows) <= rows.len() - r
    })
}

fn slmf_corpus(random: usize, seed: u64) -> CheckReport {
    let mut c = check(
        "relaxed_slmf_corpus",
        json!({ "hand_cases": 3, "random_patterns": random }),
        json!({ "max_rows": upca_core::theory::MAX_PATTERN_ROWS }),
    );
    let diagonal: Vec<Vec<usize>> = (0..6).map(|j| vec![j, (j + 1) % 6]).collect();
    let hand = [
        (
            "single_full_column",
            ObservationPattern::full(6, 1),
            2,
            true,
        ),
        (
            "double_full_column",
            ObservationPattern::full(6, 2),
            2,
            false,
        ),
        (
            "every_column_exactly_r",
            ObservationPattern::new(6, diagonal).expect("rows in range"),
            2,
            false,
        ),
    ];
    let mut mismatches = 0;
    for (label, pattern, r, want) in hand {
        match is_relaxed_slmf(&pattern, r) {
            Ok(got) if got.holds == want => {}
            Ok(got) => {
                mismatches += 1;
                c.witnesses
                    .push(json!({ "case": label, "expected": want, "violation": got.violation }));
            }
            Err(e) => return guard_failure(c, e),
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut holds = 0;
    for t in 0..random {
        let m = rng.random_range(3..=10);
        let r = rng.random_range(1..m);
        let n = rng.random_range(1..=5);
        let k = rng.random_range(r..=m);
        let run = sample_observation_pattern(m, n, k, rng.random())
            .and_then(|p| Ok((is_relaxed_slmf(&p, r)?, p)));
        match run {
            Ok((got, pattern)) => {
                let want = slmf_reference(m, pattern.omegas(), r);
                holds += want as usize;
                if got.holds != want {
                    mismatches += 1;
                    c.witnesses.push(json!({ "random": t, "m": m, "r": r, "omegas": pattern.omegas(), "expected": want }));
                }
            }
            Err(e) => return guard_failure(c, e),
        }
    }
    c.margins = json!({ "mismatches": mismatches, "random_holding": holds });
    finish(c, mismatches == 0)
}

fn umc_checks(random: usize, seed: u64) -> CheckReport {
    let mut c = check(
        "umc_hypothesis",
        json!({ "hand_cases": 3, "random_patterns": random }),
        json!({ "max_rows": upca_core::theory::MAX_PATTERN_ROWS, "max_columns": upca_core::theory::MAX_PATTERN_COLUMNS }),
    );
    let short = ObservationPattern::new(5, vec![(0..5).collect(), vec![0]]).expect("rows in range");
    let hand = [
        (
            "full_columns_rank_one",
            ObservationPattern::full(4, 3),
            1,
            true,
        ),
        (
            "fewer_columns_than_groups",
            ObservationPattern::full(5, 1),
            2,
            false,
        ),
        ("column_below_r", short, 2, false),
    ];
    let mut mismatches = 0;
    for (label, pattern, r, want) in hand {
        match check_umc_hypothesis(&pattern, r) {
            Ok(got) if got.holds == want => {}
            Ok(got) => {
                mismatches += 1;
                c.witnesses
                    .push(json!({ "case": label, "expected": want, "reason": got.reason }));
            }
            Err(e) => return guard_failure(c, e),
        }
    }
    let mut rng = rng_from_seed(seed);
    let (mut holding, mut work) = (0, 0u64);
    for t in 0..random {
        let m = rng.random_range(3..=6);
        let n = rng.random_range(2..=6);
        let r = rng.random_range(1..=2.min(m - 1));
        let omegas: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..m).filter(|_| rng.random_bool(0.8)).collect())
            .collect();
        let pattern = ObservationPattern::new(m, omegas).expect("rows in range");
        let got = match check_umc_hypothesis(&pattern, r) {
            Ok(got) => got,
            Err(e) => return guard_failure(c, e),
        };
        work += got.subsets_evaluated;
        if !got.holds {
            continue;
        }
        holding += 1;
        let mut covered: Vec<usize> = got.groups.iter().flat_map(|g| g.columns.clone()).collect();
        covered.sort_unstable();
        let valid = got.groups.len() == r
            && covered == (0..n).collect::<Vec<_>>()
            && got.groups.iter().all(|g| {
                let inside = g.sub_pattern.iter().all(|(j, w)| {
                    g.columns.contains(j) && w.iter().all(|i| pattern.omega(*j).contains(i))
                });
                let sub: Vec<Vec<usize>> = g.sub_pattern.iter().map(|(_, w)| w.clone()).collect();
                inside && slmf_reference(m, &sub, r)
            });
        if !valid {
            mismatches += 1;
            c.witnesses.push(
                json!({ "random": t, "omegas": pattern.omegas(), "r": r, "groups": got.groups }),
            );
        }
    }
    c.margins = json!({ "invalid_witnesses": mismatches, "random_holding": holding, "subsets_evaluated": work });
    finish(c, mismatches == 0)
}

/// The true factorization solves the power-sum system on observed entries
/// after each column is shuffled inside its observed rows.
fn partial_power_sums(instances: usize, seed: u64) -> CheckReport {
    let (m, n, r) = (5, 4, 2);
    let mut c = check(
        "partial_power_sums",
        json!({ "m": m, "n": n, "r": r, "instances": instances }),
        json!({}),
    );
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let run = (|| -> Result<f64> {
            let x = low_rank(m, n, r, &mut rng)?;
            let fact = canonical_factorization(&x, r)?;
            let pattern = sample_observation_pattern(m, n, m - 1, rng.random())?;
            let mut tilde = x.as_matrix().clone();
            for (j, w) in pattern.omegas().iter().enumerate() {
                let p = sample_sparse_permutation(w.len(), 1.0, rng.random())?.permutation;
                let vals: Vec<f64> = w.iter().map(|&i| x.as_matrix()[(i, j)]).collect();
                for (&i, v) in w.iter().zip(p.apply(&vals)) {
                    tilde[(i, j)] = v;
                }
            }
            let tilde = DenseMatrix::from_matrix(tilde)?;
            Ok(omega_power_sum_residual(&fact, &tilde, &pattern)?.max_scaled())
        })();
        match run {
            Ok(v) => worst = worst.max(v),
            Err(e) => return guard_failure(c, e),
        }
    }
    c.margins = json!({ "max_scaled_residual": worst, "tolerance": RESIDUAL_TOL });
    finish(c, worst <= RESIDUAL_TOL)
}

pub fn run_theory_suite(config: &TheorySuiteConfig) -> TheoryReport {
    let seed = |k: u64| {
        config
            .master_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k)
    };
    let mut checks = Vec::new();
    for (k, size) in config.rank_minimality.iter().enumerate() {
        checks.push(rank_minimality(*size, seed(100 + k as u64)));
    }
    if config.degenerate_cases {
        checks.extend(degenerate_checks(seed(200)));
    }
    for (k, size) in config.enumeration.iter().enumerate() {
        checks.push(enumeration(*size, seed(300 + k as u64)));
    }
    checks.push(multiset_fuzz(config.multiset_pairs, seed(400)));
    checks.push(slmf_corpus(config.slmf_random_patterns, seed(500)));
    checks.push(umc_checks(config.umc_random_patterns, seed(600)));
    checks.push(partial_power_sums(
        config.partial_power_sum_instances,
        seed(700),
    ));
    let checks_passed = checks.iter().filter(|c| c.pass).count();
    TheoryReport {
        pass: checks_passed == checks.len(),
        checks_total: checks.len(),
        checks_passed,
        config: config.clone(),
        checks,
    }
}
