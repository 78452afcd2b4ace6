//! Browser bindings: small interactive versions of the subspace estimate,
//! the phase-transition sweep and single-column restoration.
//!
//! Each exported function takes plain numbers and returns a JSON string, so
//! the page needs no glue beyond `JSON.parse`.

use serde::Serialize;
use upca_core::datagen::{generate, sample_inliers, sample_sparse_permutation, sample_subspace};
use upca_core::numerics::max_angle_degrees;
use upca_core::stage1::estimate;
use upca_core::stage2::{default_l1_lambda, restore_column};
use upca_core::{
    CorruptionSpec, DpcpConfig, OutlierModel, RestorationMethod, RestoreOptions, Result, Snr,
    Stage1Method,
};
use wasm_bindgen::prelude::*;

/// Largest sizes the page accepts, to keep a click under a few seconds.
pub const MAX_M: usize = 100;
pub const MAX_N: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceRun {
    pub method: Stage1Method,
    pub theta_max_deg: f64,
    pub iterations: usize,
    pub objective: f64,
    pub realized_alpha: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub ranks: Vec<usize>,
    pub ratios: Vec<f64>,
    /// `theta[i][k]`: mean θ_max at `ranks[i]`, `ratios[k]`; `None` on error.
    pub theta: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnRun {
    pub method: RestorationMethod,
    pub x_star: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub moved: Vec<usize>,
    pub rel_error: f64,
}

fn check_size(m: usize, n: usize) -> Result<()> {
    if m > MAX_M || n > MAX_N {
        return Err(upca_core::Error::InvalidArgument(format!(
            "demo limits are m <= {MAX_M}, n <= {MAX_N}"
        )));
    }
    Ok(())
}

fn spec(n: usize, ratio: f64, alpha: f64, seed: u64) -> CorruptionSpec {
    CorruptionSpec {
        n_total: n,
        n_out: (ratio * n as f64).round() as usize,
        alpha,
        snr: Snr::Noiseless,
        seed,
        outlier_model: OutlierModel::Permuted,
    }
}

pub fn subspace_run(
    m: usize,
    n: usize,
    r: usize,
    ratio: f64,
    alpha: f64,
    method: Stage1Method,
    seed: u64,
) -> Result<SubspaceRun> {
    check_size(m, n)?;
    let spec = spec(n, ratio, alpha, seed);
    let bundle = generate(m, r, &spec)?;
    let est = estimate(&bundle.x_tilde, r, method, &DpcpConfig::default())?;
    Ok(SubspaceRun {
        method,
        theta_max_deg: max_angle_degrees(&est.s_hat, &bundle.s_star)?,
        iterations: est.iterations_used,
        objective: est.final_objective,
        realized_alpha: bundle.realized_alpha_mean(spec.n_out),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    m: usize,
    n: usize,
    ranks: &[usize],
    ratios: &[f64],
    alpha: f64,
    trials: u32,
    method: Stage1Method,
    seed: u64,
) -> Result<Sweep> {
    check_size(m, n)?;
    if trials == 0 || ranks.is_empty() || ratios.is_empty() {
        return Err(upca_core::Error::InvalidArgument(
            "need at least one rank, ratio and trial".into(),
        ));
    }
    let mut theta = Vec::with_capacity(ranks.len());
    for (i, &r) in ranks.iter().enumerate() {
        let mut row = Vec::with_capacity(ratios.len());
        for (k, &ratio) in ratios.iter().enumerate() {
            let mut total = 0.0;
            let mut ok = true;
            for t in 0..trials {
                let cell_seed = seed ^ ((i as u64) << 48 | (k as u64) << 32 | t as u64);
                match subspace_run(m, n, r, ratio, alpha, method, cell_seed) {
                    Ok(run) => total += run.theta_max_deg,
                    Err(_) => ok = false,
                }
            }
            row.push(ok.then(|| total / trials as f64));
        }
        theta.push(row);
    }
    Ok(Sweep {
        ranks: ranks.to_vec(),
        ratios: ratios.to_vec(),
        theta,
    })
}

/// Column count assumed for the default ℓ1-RR penalty of a lone column.
pub const L1_COLUMNS: usize = 500;

/// One random column of a random `r`-plane, permuted on an α-fraction of
/// its coordinates, restored with the true subspace.
pub fn column_run(
    m: usize,
    r: usize,
    alpha: f64,
    method: RestorationMethod,
    seed: u64,
) -> Result<ColumnRun> {
    check_size(m, 1)?;
    let basis = sample_subspace(m, r, seed)?;
    let x_star = sample_inliers(&basis, 1, seed.wrapping_add(1))?.column_vector(0);
    let perm = sample_sparse_permutation(m, alpha, seed.wrapping_add(2))?.permutation;
    let x_tilde = perm.apply_vector(&x_star);
    let res = restore_column(
        &x_tilde,
        &basis,
        method,
        &RestoreOptions::default(),
        L1_COLUMNS,
        0,
    )?;
    let rel_error = (&res.x_hat - &x_star).norm() / x_star.norm();
    Ok(ColumnRun {
        method,
        x_star: x_star.iter().copied().collect(),
        x_tilde: x_tilde.iter().copied().collect(),
        x_hat: res.x_hat.iter().copied().collect(),
        moved: perm.support(),
        rel_error,
    })
}

/// Default ℓ1-RR penalty for a given column count, shown on the page.
pub fn l1_lambda(n: usize) -> f64 {
    default_l1_lambda(n)
}

fn to_json<T: Serialize>(out: Result<T>) -> std::result::Result<String, JsError> {
    let value = out.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, JsError> {
    s.parse()
        .map_err(|_| JsError::new(&format!("bad {what} {s:?}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<Vec<T>, JsError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse(t.trim(), what))
        .collect()
}

#[wasm_bindgen(js_name = estimateSubspace)]
pub fn estimate_subspace_js(
    m: usize,
    n: usize,
    r: usize,
    ratio: f64,
    alpha: f64,
    method: &str,
    seed: u64,
) -> std::result::Result<String, JsError> {
    let method = parse(method, "stage-1 method")?;
    to_json(subspace_run(m, n, r, ratio, alpha, method, seed))
}

#[wasm_bindgen(js_name = phaseTransition)]
#[allow(clippy::too_many_arguments)]
pub fn phase_transition_js(
    m: usize,
    n: usize,
    ranks: &str,
    ratios: &str,
    alpha: f64,
    trials: u32,
    method: &str,
    seed: u64,
) -> std::result::Result<String, JsError> {
    let method = parse(method, "stage-1 method")?;
    let ranks = parse_list(ranks, "rank")?;
    let ratios = parse_list(ratios, "ratio")?;
    to_json(sweep(m, n, &ranks, &ratios, alpha, trials, method, seed))
}

#[wasm_bindgen(js_name = restoreColumn)]
pub fn restore_column_js(
    m: usize,
    r: usize,
    alpha: f64,
    method: &str,
    seed: u64,
) -> std::result::Result<String, JsError> {
    let method = parse(method, "stage-2 method")?;
    to_json(column_run(m, r, alpha, method, seed))
}
