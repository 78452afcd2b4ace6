//! Linear regression without correspondences: given a subspace basis `B`
//! and a column `x̃ = Πx*` with `x* ∈ span(B)`, find `x̂ ∈ span(B)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Permutation;
use crate::error::{Error, Result};
use crate::numerics::{
    project_onto, rank_from_singular_values, singular_values, DenseMatrix, Pseudoinverse,
    SubspaceBasis, DEFAULT_RANK_TOL,
};
use crate::seed::rng_from_seed;

/// Largest `m` accepted by [`brute_force_slr`] (`8! = 40320` candidates).
pub const BRUTE_FORCE_MAX_M: usize = 8;

const L1_MAX_ITER: usize = 10_000;
const L1_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestorationMethod {
    Lsrf,
    #[serde(alias = "l1-rr", alias = "l1_rr")]
    L1rr,
    #[serde(alias = "em", alias = "sorting-em")]
    SortingEm,
    #[serde(alias = "brute", alias = "brute-force")]
    BruteForce,
}

impl RestorationMethod {
    pub fn name(self) -> &'static str {
        match self {
            RestorationMethod::Lsrf => "lsrf",
            RestorationMethod::L1rr => "l1rr",
            RestorationMethod::SortingEm => "em",
            RestorationMethod::BruteForce => "brute",
        }
    }
}

impl std::str::FromStr for RestorationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "lsrf" => Ok(RestorationMethod::Lsrf),
            "l1rr" => Ok(RestorationMethod::L1rr),
            "em" | "sortingem" => Ok(RestorationMethod::SortingEm),
            "brute" | "bruteforce" => Ok(RestorationMethod::BruteForce),
            other => Err(Error::invalid(format!("unknown stage-2 method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RestorationResult {
    pub x_hat: DVector<f64>,
    pub theta_hat: DVector<f64>,
    /// Coordinates discarded by LSRF, in removal order.
    pub removed_coords: Vec<usize>,
    /// Nonzero entries of the sparse corruption estimate (ℓ1-RR).
    pub support_estimate: Vec<usize>,
    /// `Π̂` with `x̃ ≈ Π̂x̂`, for the permutation-producing solvers.
    pub permutation: Option<Permutation>,
    /// `‖x̃ − Π̂x̂‖₂` when `Π̂` exists, the ℓ1-RR composite objective for
    /// ℓ1-RR, and `‖x̃ − x̂‖₂` otherwise.
    pub objective: f64,
    pub method: RestorationMethod,
    pub iterations: usize,
    /// Per-iteration objective values for the iterative solvers.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub residual_fractions: Vec<f64>,
    pub threshold: f64,
    pub outlier_indices: Vec<usize>,
}

/// Flags columns whose relative distance to `s` exceeds `threshold`.
pub fn detect_outliers(
    x: &DenseMatrix,
    s: &SubspaceBasis,
    threshold: f64,
) -> Result<OutlierReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    if x.rows() != s.ambient_dim() {
        return Err(Error::dims(
            "matrix rows differ from the subspace ambient dimension",
        ));
    }
    let mut fractions = Vec::with_capacity(x.cols());
    let mut outliers = Vec::new();
    for j in 0..x.cols() {
        let col = x.column_vector(j);
        let norm = col.norm();
        let fraction = if norm > 0.0 {
            project_onto(s, &col)?.1 / norm
        } else {
            0.0
        };
        if fraction > threshold {
            outliers.push(j);
        }
        fractions.push(fraction);
    }
    Ok(OutlierReport {
        residual_fractions: fractions,
        threshold,
        outlier_indices: outliers,
    })
}

fn check_column(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<()> {
    if x.len() != basis.ambient_dim() {
        return Err(Error::dims(format!(
            "column of length {} against ambient dimension {}",
            x.len(),
            basis.ambient_dim()
        )));
    }
    Ok(())
}

fn select_rows(b: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), b.ncols(), |i, k| b[(rows[i], k)])
}

/// What LSRF computes before the final square solve is judged.
struct Filtration {
    theta: DVector<f64>,
    fallback: DVector<f64>,
    removed: Vec<usize>,
    degenerate: bool,
}

fn filtrate(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<Filtration> {
    let b = basis.matrix();
    let (m, r) = b.shape();
    let mut active: Vec<usize> = (0..m).collect();
    let mut removed = Vec::with_capacity(m - r);
    let mut fallback = None;
    loop {
        let sub = select_rows(b, &active);
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&i| x[i]));
        if active.len() == r {
            let degenerate =
                rank_from_singular_values(&singular_values(&sub)?, DEFAULT_RANK_TOL) < r;
            let theta = Pseudoinverse::new(&sub, DEFAULT_RANK_TOL)?.solve(&rhs);
            let fallback = fallback.unwrap_or_else(|| theta.clone());
            return Ok(Filtration {
                theta,
                fallback,
                removed,
                degenerate,
            });
        }
        // Intermediate fits only rank the residuals, so the normal
        // equations suffice; the r+1 fit is kept as a fallback and gets the
        // careful solve.
        let theta = if active.len() == r + 1 {
            Pseudoinverse::new(&sub, DEFAULT_RANK_TOL)?.solve(&rhs)
        } else {
            let gram = sub.transpose() * &sub;
            match gram.cholesky() {
                Some(chol) => chol.solve(&(sub.transpose() * &rhs)),
                None => Pseudoinverse::new(&sub, DEFAULT_RANK_TOL)?.solve(&rhs),
            }
        };
        let resid = &sub * &theta - &rhs;
        let mut worst = 0;
        for k in 1..active.len() {
            if resid[k].abs() > resid[worst].abs() {
                worst = k;
            }
        }
        if active.len() == r + 1 {
            fallback = Some(theta);
        }
        removed.push(active.remove(worst));
    }
}

fn finish(
    basis: &SubspaceBasis,
    x: &DVector<f64>,
    theta: DVector<f64>,
    method: RestorationMethod,
) -> RestorationResult {
    let x_hat = basis.matrix() * &theta;
    let objective = (x - &x_hat).norm();
    RestorationResult {
        x_hat,
        theta_hat: theta,
        removed_coords: Vec::new(),
        support_estimate: Vec::new(),
        permutation: None,
        objective,
        method,
        iterations: 0,
        history: Vec::new(),
    }
}

/// Least squares with recursive filtration: repeatedly fit by least squares
/// and drop the coordinate with the largest absolute residual until `r`
/// coordinates remain, then solve on those.
pub fn lsrf(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<RestorationResult> {
    let out = lsrf_inner(x, basis)?;
    match out {
        (result, false) => Ok(result),
        (_, true) => Err(Error::DegenerateFiltration(basis.dim())),
    }
}

/// LSRF that falls back to the `r+1`-row solution when the final square
/// system is rank deficient.
pub fn lsrf_with_fallback(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<RestorationResult> {
    Ok(lsrf_inner(x, basis)?.0)
}

fn lsrf_inner(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<(RestorationResult, bool)> {
    check_column(x, basis)?;
    if basis.ambient_dim() <= basis.dim() {
        return Err(Error::invalid("LSRF needs m > r"));
    }
    let f = filtrate(x, basis)?;
    let theta = if f.degenerate { f.fallback } else { f.theta };
    let mut result = finish(basis, x, theta, RestorationMethod::Lsrf);
    result.iterations = f.removed.len();
    result.removed_coords = f.removed;
    Ok((result, f.degenerate))
}

/// Default ℓ1-RR penalty `0.01·sqrt(ln n / n)` for `n` columns.
pub fn default_l1_lambda(n: usize) -> f64 {
    let n = n.max(2) as f64;
    0.01 * (n.ln() / n).sqrt()
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn l1_objective(x: &DVector<f64>, fit: &DVector<f64>, e: &DVector<f64>, lambda: f64) -> f64 {
    let m = x.len() as f64;
    (x - fit - e).norm_squared() / (2.0 * m) + lambda / m.sqrt() * e.lp_norm(1)
}

/// ℓ1 robust regression `min (1/2m)‖x̃ − Bθ − √m·ξ‖² + λ‖ξ‖₁`, solved in
/// `e = √m·ξ` by exact block coordinate descent on `θ` and `e`. The e-step
/// is a soft threshold at `λ·√m`.
pub fn l1_rr(x: &DVector<f64>, basis: &SubspaceBasis, lambda: f64) -> Result<RestorationResult> {
    check_column(x, basis)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let b = basis.matrix();
    let m = x.len();
    let pinv = Pseudoinverse::new(b, DEFAULT_RANK_TOL)?;
    let threshold = lambda * (m as f64).sqrt();
    let shrink = |fit: &DVector<f64>| (x - fit).map(|v| soft_threshold(v, threshold));
    let mut theta = pinv.solve(x);
    let mut fit = b * &theta;
    let mut e = shrink(&fit);
    let mut history = vec![l1_objective(x, &fit, &e, lambda)];
    let mut iterations = 1;
    while iterations < L1_MAX_ITER {
        iterations += 1;
        let next = pinv.solve(&(x - &e));
        let step = (&next - &theta).norm();
        theta = next;
        fit = b * &theta;
        e = shrink(&fit);
        history.push(l1_objective(x, &fit, &e, lambda));
        if step <= L1_TOL * (1.0 + theta.norm()) {
            break;
        }
    }
    let objective = *history.last().expect("at least one iteration");
    let support = e
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect();
    let mut result = finish(basis, x, theta, RestorationMethod::L1rr);
    result.objective = objective;
    result.support_estimate = support;
    result.iterations = iterations;
    result.history = history;
    Ok(result)
}

/// `x̂[i] = x̃[image[i]]`, i.e. `Π̂ᵀx̃`.
fn unpermute(x: &DVector<f64>, p: &Permutation) -> DVector<f64> {
    DVector::from_iterator(x.len(), p.image().iter().map(|&k| x[k]))
}

fn sorted_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

/// The permutation sending the k-th smallest entry of `y` onto the position
/// of the k-th smallest entry of `x`, the minimizer of `‖x − Πy‖`.
fn sorting_permutation(x: &DVector<f64>, y: &DVector<f64>) -> Permutation {
    let ox = sorted_order(x.as_slice());
    let oy = sorted_order(y.as_slice());
    let mut image = vec![0; x.len()];
    for (&iy, &ix) in oy.iter().zip(&ox) {
        image[iy] = ix;
    }
    Permutation::new(image).expect("sorting pairs form a bijection")
}

/// Alternating minimization of `‖x̃ − ΠBθ‖` over `Π` (by sorting) and `θ`
/// (by least squares), from several starting points.
///
/// The first restart starts at the plain least-squares fit; the others at
/// Gaussian coefficient vectors.
pub fn sorting_em(
    x: &DVector<f64>,
    basis: &SubspaceBasis,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<RestorationResult> {
    check_column(x, basis)?;
    if restarts == 0 || max_iter == 0 {
        return Err(Error::invalid("restarts and max_iter must be positive"));
    }
    let b = basis.matrix();
    let (m, r) = b.shape();
    let pinv = Pseudoinverse::new(b, DEFAULT_RANK_TOL)?;
    let mut rng = rng_from_seed(seed);
    let mut best: Option<RestorationResult> = None;
    for restart in 0..restarts {
        let (mut theta, mut previous) = if restart == 0 {
            (pinv.solve(x), Some(Permutation::identity(m)))
        } else {
            (
                DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng)),
                None,
            )
        };
        let mut history = Vec::new();
        let mut perm = Permutation::identity(m);
        let mut iterations = 0;
        for it in 1..=max_iter {
            iterations = it;
            let fit = b * &theta;
            perm = sorting_permutation(x, &fit);
            let target = unpermute(x, &perm);
            theta = pinv.solve(&target);
            history.push((target - b * &theta).norm());
            if previous.as_ref() == Some(&perm) {
                break;
            }
            previous = Some(perm.clone());
        }
        let objective = *history.last().expect("at least one iteration");
        if best.as_ref().is_none_or(|cur| objective < cur.objective) {
            let mut result = finish(basis, x, theta.clone(), RestorationMethod::SortingEm);
            result.objective = objective;
            result.permutation = Some(perm);
            result.iterations = iterations;
            result.history = history;
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Exact solution of `min_{Π, θ} ‖x̃ − ΠBθ‖` by enumerating all `m!`
/// permutations; ties keep the lexicographically first `Π`.
pub fn brute_force_slr(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<RestorationResult> {
    check_column(x, basis)?;
    let m = x.len();
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::GuardExceeded(format!(
            "brute force over {m}! permutations (limit m <= {BRUTE_FORCE_MAX_M})"
        )));
    }
    let b = basis.matrix();
    let pinv = Pseudoinverse::new(b, DEFAULT_RANK_TOL)?;
    let mut best: Option<(f64, Permutation, DVector<f64>)> = None;
    for perm in Permutation::all(m) {
        let target = unpermute(x, &perm);
        let theta = pinv.solve(&target);
        let objective = (&target - b * &theta).norm();
        if best.as_ref().is_none_or(|(cur, _, _)| objective < *cur) {
            best = Some((objective, perm, theta));
        }
    }
    let (objective, perm, theta) = best.expect("m >= 1");
    let mut result = finish(basis, x, theta, RestorationMethod::BruteForce);
    result.objective = objective;
    result.permutation = Some(perm);
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestoreOptions {
    /// Relative residual above which a column counts as an outlier.
    pub threshold: f64,
    /// ℓ1-RR penalty; `None` uses [`default_l1_lambda`] of the column count.
    pub lambda: Option<f64>,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Replace inlier columns by their projection onto the subspace instead
    /// of passing them through.
    pub project_inliers: bool,
}

impl Default for RestoreOptions {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            lambda: None,
            restarts: 20,
            max_iter: 1000,
            seed: 0,
            project_inliers: true,
        }
    }
}

/// Restores one column with the chosen solver.
pub fn restore_column(
    x: &DVector<f64>,
    basis: &SubspaceBasis,
    method: RestorationMethod,
    options: &RestoreOptions,
    n_columns: usize,
    column: usize,
) -> Result<RestorationResult> {
    match method {
        RestorationMethod::Lsrf => lsrf_with_fallback(x, basis),
        RestorationMethod::L1rr => l1_rr(
            x,
            basis,
            options
                .lambda
                .unwrap_or_else(|| default_l1_lambda(n_columns)),
        ),
        RestorationMethod::SortingEm => sorting_em(
            x,
            basis,
            options.restarts,
            options.max_iter,
            options.seed.wrapping_add(column as u64),
        ),
        RestorationMethod::BruteForce => brute_force_slr(x, basis),
    }
}

/// Detects outlier columns against `s` and replaces them by the solver's
/// estimate. Columns are processed in parallel and gathered by index.
pub fn restore_matrix(
    x: &DenseMatrix,
    s: &SubspaceBasis,
    method: RestorationMethod,
    options: &RestoreOptions,
) -> Result<(DenseMatrix, OutlierReport)> {
    let report = detect_outliers(x, s, options.threshold)?;
    let n = x.cols();
    let restored: Vec<(usize, DVector<f64>)> = report
        .outlier_indices
        .par_iter()
        .map(|&j| {
            restore_column(&x.column_vector(j), s, method, options, n, j).map(|res| (j, res.x_hat))
        })
        .collect::<Result<_>>()?;
    let mut out = x.as_matrix().clone();
    if options.project_inliers {
        let mut is_outlier = vec![false; n];
        for &j in &report.outlier_indices {
            is_outlier[j] = true;
        }
        let b = s.matrix();
        for j in (0..n).filter(|&j| !is_outlier[j]) {
            let col = x.column(j);
            let proj = b * (b.transpose() * col);
            out.set_column(j, &proj);
        }
    }
    for (j, col) in restored {
        out.set_column(j, &col);
    }
    Ok((DenseMatrix::from_matrix(out)?, report))
}

/// `‖X* − X̂‖_F / ‖X*‖_F` over all columns.
pub fn relative_error(x_hat: &DenseMatrix, x_star: &DenseMatrix) -> Result<f64> {
    if x_hat.shape() != x_star.shape() {
        return Err(Error::dims("estimate and ground truth differ in shape"));
    }
    let denom = x_star.as_matrix().norm();
    let diff = (x_hat.as_matrix() - x_star.as_matrix()).norm();
    Ok(if denom > 0.0 { diff / denom } else { diff })
}
