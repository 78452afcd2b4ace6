//! Robust subspace estimation from a column-corrupted matrix.
//!
//! Three estimators share one output type: Coherence Pursuit scores columns by how
//! strongly they correlate with the rest; the two DPCP solvers minimize
//! `‖X̃ᵀB‖₁,₂` over orthonormal `m×(m−r)` matrices `B` and return the
//! orthogonal complement of the minimizer.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    ascending_order, orthogonal_complement, reorthonormalize, thin_svd, DenseMatrix, SubspaceBasis,
    DEFAULT_RANK_TOL,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpcpConfig {
    pub max_iter: usize,
    pub eps: f64,
    pub delta: f64,
    pub mu0: f64,
    pub beta: f64,
    pub mu_floor: f64,
    pub stall_factor: f64,
}

impl Default for DpcpConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            eps: 1e-9,
            delta: 1e-15,
            mu0: 0.01,
            beta: 0.5,
            mu_floor: 1e-15,
            stall_factor: 0.001,
        }
    }
}

impl DpcpConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("delta", self.delta),
            ("mu0", self.mu0),
            ("mu_floor", self.mu_floor),
            ("stall_factor", self.stall_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage1Method {
    #[serde(alias = "cop")]
    Cop,
    #[serde(alias = "dpcp_irls")]
    DpcpIrls,
    #[serde(alias = "dpcp_rsgm")]
    DpcpRsgm,
}

impl Stage1Method {
    pub fn name(self) -> &'static str {
        match self {
            Stage1Method::Cop => "cop",
            Stage1Method::DpcpIrls => "dpcp-irls",
            Stage1Method::DpcpRsgm => "dpcp-rsgm",
        }
    }
}

impl std::str::FromStr for Stage1Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "cop" => Ok(Stage1Method::Cop),
            "dpcp-irls" | "irls" => Ok(Stage1Method::DpcpIrls),
            "dpcp-rsgm" | "rsgm" => Ok(Stage1Method::DpcpRsgm),
            other => Err(Error::invalid(format!("unknown stage-1 method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubspaceEstimate {
    pub s_hat: SubspaceBasis,
    pub method: Stage1Method,
    pub iterations_used: usize,
    /// `Σ_j ‖x̃_j − P_Ŝ x̃_j‖₂`, the DPCP objective at the returned estimate.
    pub final_objective: f64,
    /// Coherence scores, for CoP only.
    pub scores: Option<Vec<f64>>,
    /// Objective after initialization and after every accepted iterate.
    pub objective_history: Vec<f64>,
}

fn check_rank(x: &DenseMatrix, r: usize) -> Result<()> {
    let m = x.rows();
    if r == 0 || r >= m {
        return Err(Error::invalid(format!(
            "need 1 <= r < m, got r = {r}, m = {m}"
        )));
    }
    Ok(())
}

/// `Σ_j ‖Bᵀx_j‖₂` for orthonormal `B`.
pub fn dpcp_objective(x: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let proj = x.transpose() * b;
    proj.row_iter().map(|row| row.norm()).sum()
}

/// Total distance of the columns of `x` to `s`.
pub fn residual_objective(x: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    let resid = x - s * (s.transpose() * x);
    resid.column_iter().map(|c| c.norm()).sum()
}

/// `‖X̃₋ⱼᵀ x̃_j‖₂` on unit-normalized columns; zero columns score 0.
pub fn cop_scores(x: &DenseMatrix) -> Result<Vec<f64>> {
    let n = x.cols();
    if n < 2 {
        return Err(Error::invalid("coherence needs at least two columns"));
    }
    let mut normalized = x.as_matrix().clone();
    for mut col in normalized.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let gram = normalized.transpose() * &normalized;
    Ok((0..n)
        .map(|j| {
            let sq: f64 = (0..n)
                .filter(|&i| i != j)
                .map(|i| gram[(i, j)].powi(2))
                .sum();
            sq.sqrt()
        })
        .collect())
}

/// Coherence Pursuit: the `r` highest-scoring columns that are linearly
/// independent of the ones already kept.
pub fn cop_subspace(x: &DenseMatrix, r: usize) -> Result<SubspaceEstimate> {
    check_rank(x, r)?;
    let scores = cop_scores(x)?;
    let mut order: Vec<usize> = (0..x.cols()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let m = x.rows();
    let mut q: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(r);
    let mut kept = Vec::with_capacity(r);
    for &j in &order {
        if kept.len() == r {
            break;
        }
        let col = x.column_vector(j);
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = col.clone();
        for _ in 0..2 {
            for qk in &q {
                let d = qk.dot(&v);
                v.axpy(-d, qk, 1.0);
            }
        }
        let rest = v.norm();
        if rest > DEFAULT_RANK_TOL * norm {
            q.push(v / rest);
            kept.push(j);
        }
    }
    if kept.len() < r {
        return Err(Error::InsufficientRank {
            found: kept.len(),
            needed: r,
        });
    }
    let cols: Vec<_> = kept.iter().map(|&j| x.column_vector(j)).collect();
    let s_hat = SubspaceBasis::orthonormalize(&DMatrix::from_columns(&cols))?;
    debug_assert_eq!(s_hat.ambient_dim(), m);
    let objective = residual_objective(x.as_matrix(), s_hat.matrix());
    Ok(SubspaceEstimate {
        s_hat,
        method: Stage1Method::Cop,
        iterations_used: 0,
        final_objective: objective,
        scores: Some(scores),
        objective_history: vec![objective],
    })
}

/// Eigenvectors of a symmetric matrix split into the `low` smallest and the
/// rest.
fn split_eigenvectors(sym: DMatrix<f64>, low: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let order = ascending_order(eig.eigenvalues.as_slice());
    let mut bottom = DMatrix::zeros(m, low);
    let mut top = DMatrix::zeros(m, m - low);
    for (k, &idx) in order.iter().enumerate() {
        if k < low {
            bottom.set_column(k, &eig.eigenvectors.column(idx));
        } else {
            top.set_column(k - low, &eig.eigenvectors.column(idx));
        }
    }
    (reorthonormalize(bottom), reorthonormalize(top))
}

fn weighted_scatter(x: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[j].sqrt();
    }
    let mut c = &scaled * scaled.transpose();
    c = (&c + c.transpose()) * 0.5;
    c
}

fn column_norms_after(x: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let proj = x.transpose() * b;
    proj.row_iter().map(|row| row.norm()).collect()
}

/// DPCP by iteratively reweighted least squares.
///
/// Each step minimizes `Σ_j w_j ‖Bᵀx̃_j‖²` with `w_j = 1/max(δ, ‖Bᵀx̃_j‖)`,
/// a majorizer of the objective at the current iterate, so the objective
/// never increases.
pub fn dpcp_irls(x: &DenseMatrix, r: usize, cfg: &DpcpConfig) -> Result<SubspaceEstimate> {
    check_rank(x, r)?;
    cfg.validate()?;
    let xm = x.as_matrix();
    let c = x.rows() - r;
    let (mut b, mut s) = split_eigenvectors(weighted_scatter(xm, &vec![1.0; x.cols()]), c);
    let mut objective = dpcp_objective(xm, &b);
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut history = vec![objective];
    let mut iterations = 0;
    for iteration in 1..=cfg.max_iter {
        iterations = iteration;
        let weights: Vec<f64> = column_norms_after(xm, &b)
            .into_iter()
            .map(|d| 1.0 / d.max(cfg.delta))
            .collect();
        let (b_next, s_next) = split_eigenvectors(weighted_scatter(xm, &weights), c);
        let next = dpcp_objective(xm, &b_next);
        if !next.is_finite() {
            return Err(Error::NonFiniteObjective { iteration });
        }
        if next > objective {
            // A rounding-level increase: the previous iterate is the fixed point.
            break;
        }
        let decrease = objective - next;
        b = b_next;
        s = s_next;
        objective = next;
        history.push(objective);
        if decrease < cfg.eps {
            break;
        }
    }
    Ok(SubspaceEstimate {
        s_hat: SubspaceBasis::from_orthonormal(s)?,
        method: Stage1Method::DpcpIrls,
        iterations_used: iterations,
        final_objective: objective,
        scores: None,
        objective_history: history,
    })
}

/// DPCP by Riemannian subgradient descent on the Stiefel manifold with QR
/// retraction and a geometrically shrinking step size.
///
/// The step shrinks by `beta` whenever an iterate lowers the objective by
/// less than `stall_factor·μ·‖G‖_F`. The best iterate seen is returned.
pub fn dpcp_rsgm(x: &DenseMatrix, r: usize, cfg: &DpcpConfig) -> Result<SubspaceEstimate> {
    check_rank(x, r)?;
    cfg.validate()?;
    let xm = x.as_matrix();
    let c = x.rows() - r;
    let (mut b, _) = split_eigenvectors(weighted_scatter(xm, &vec![1.0; x.cols()]), c);
    let mut objective = dpcp_objective(xm, &b);
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut best = (b.clone(), objective);
    let mut history = vec![objective];
    let mut mu = cfg.mu0;
    let mut iterations = 0;
    for iteration in 1..=cfg.max_iter {
        iterations = iteration;
        let mut proj = xm.transpose() * &b;
        for mut row in proj.row_iter_mut() {
            let norm = row.norm();
            if norm < cfg.delta {
                row.fill(0.0);
            } else {
                row /= norm;
            }
        }
        let grad = xm * proj;
        let btg = b.transpose() * &grad;
        let sym = (&btg + btg.transpose()) * 0.5;
        let riemannian = &grad - &b * sym;
        let gnorm = riemannian.norm();
        if gnorm == 0.0 {
            break;
        }
        b = reorthonormalize(&b - &riemannian * mu);
        let next = dpcp_objective(xm, &b);
        if !next.is_finite() {
            return Err(Error::NonFiniteObjective { iteration });
        }
        if objective - next < cfg.stall_factor * mu * gnorm {
            mu = (cfg.beta * mu).max(cfg.mu_floor);
        }
        objective = next;
        history.push(objective);
        if objective < best.1 {
            best = (b.clone(), objective);
        }
        if mu <= cfg.mu_floor && mu * gnorm < f64::EPSILON {
            break;
        }
    }
    let s_hat = SubspaceBasis::from_orthonormal(orthogonal_complement(&best.0))?;
    Ok(SubspaceEstimate {
        s_hat,
        method: Stage1Method::DpcpRsgm,
        iterations_used: iterations,
        final_objective: best.1,
        scores: None,
        objective_history: history,
    })
}

pub fn estimate(
    x: &DenseMatrix,
    r: usize,
    method: Stage1Method,
    cfg: &DpcpConfig,
) -> Result<SubspaceEstimate> {
    match method {
        Stage1Method::Cop => cop_subspace(x, r),
        Stage1Method::DpcpIrls => dpcp_irls(x, r, cfg),
        Stage1Method::DpcpRsgm => dpcp_rsgm(x, r, cfg),
    }
}

/// Fits in the coordinates of the thin left singular vectors `U` of `x̃` and
/// maps the result back through `U`. Meant for tall data (`m > n`) where the
/// fit then runs on an `n×n` problem.
pub fn project_reduce(
    x: &DenseMatrix,
    method: Stage1Method,
    r: usize,
    cfg: &DpcpConfig,
) -> Result<SubspaceEstimate> {
    let svd = thin_svd(x)?;
    let k = svd.singular_values.len();
    if r == 0 || r >= k {
        return Err(Error::invalid(format!(
            "need 1 <= r < min(m, n) = {k}, got {r}"
        )));
    }
    let reduced = DenseMatrix::from_matrix(svd.u.transpose() * x.as_matrix())?;
    let inner = estimate(&reduced, r, method, cfg)?;
    let embedded = reorthonormalize(&svd.u * inner.s_hat.matrix());
    let s_hat = SubspaceBasis::from_orthonormal(embedded)?;
    let final_objective = residual_objective(x.as_matrix(), s_hat.matrix());
    Ok(SubspaceEstimate {
        s_hat,
        final_objective,
        ..inner
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, CorruptionSpec, OutlierModel, Snr};
    use crate::numerics::max_angle_degrees;
    use nalgebra::DVector;

    fn bundle(
        m: usize,
        n: usize,
        r: usize,
        n_out: usize,
        alpha: f64,
        seed: u64,
    ) -> crate::GroundTruthBundle {
        let spec = CorruptionSpec {
            n_total: n,
            n_out,
            alpha,
            snr: Snr::Noiseless,
            seed,
            outlier_model: OutlierModel::Permuted,
        };
        generate(m, r, &spec).unwrap()
    }

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(rows, cols, v).unwrap()
    }

    #[test]
    fn cop_score_cases() {
        let dup = mat(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(cop_scores(&dup).unwrap(), vec![1.0, 1.0]);
        let orth = mat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(cop_scores(&orth).unwrap(), vec![0.0, 0.0]);
        let three = mat(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(cop_scores(&three).unwrap(), vec![1.0, 1.0, 0.0]);
        assert!(cop_scores(&mat(2, 1, &[1.0, 0.0])).is_err());
    }

    #[test]
    fn cop_scores_ignore_column_scale() {
        let b = bundle(6, 20, 2, 5, 0.5, 3);
        let base = cop_scores(&b.x_tilde).unwrap();
        let mut scaled = b.x_tilde.as_matrix().clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= 0.1 + j as f64;
        }
        let other = cop_scores(&DenseMatrix::from_matrix(scaled).unwrap()).unwrap();
        for (a, c) in base.iter().zip(&other) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn cop_recovers_clean_data_and_duplicates() {
        let b = bundle(10, 40, 3, 0, 0.0, 1);
        let est = cop_subspace(&b.x_tilde, 3).unwrap();
        assert!(
            max_angle_degrees(&est.s_hat, &b.s_star)
                .unwrap()
                .to_radians()
                < 1e-8
        );

        // 9 copies of one direction plus one orthogonal junk column
        let inlier = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let junk = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let mut cols = vec![inlier.clone(); 9];
        cols.push(junk);
        let x = DenseMatrix::from_columns(&cols).unwrap();
        let est = cop_subspace(&x, 1).unwrap();
        assert!((est.s_hat.matrix().column(0).dot(&inlier).abs() - 1.0).abs() < 1e-12);

        // rank-deficient input
        let x = DenseMatrix::from_columns(&vec![inlier; 4]).unwrap();
        assert!(matches!(
            cop_subspace(&x, 2),
            Err(Error::InsufficientRank { .. })
        ));
    }

    #[test]
    fn irls_on_clean_data() {
        let b = bundle(12, 60, 4, 0, 0.0, 5);
        let est = dpcp_irls(&b.x_tilde, 4, &DpcpConfig::default()).unwrap();
        assert!(est.final_objective <= 1e-8 * b.x_tilde.as_matrix().norm());
        assert!(
            max_angle_degrees(&est.s_hat, &b.s_star)
                .unwrap()
                .to_radians()
                <= 1e-6
        );
    }

    #[test]
    fn irls_objective_is_monotone() {
        for seed in 0..5 {
            let b = bundle(20, 150, 8, 60, 0.3, seed);
            let est = dpcp_irls(&b.x_tilde, 8, &DpcpConfig::default()).unwrap();
            for w in est.objective_history.windows(2) {
                assert!(w[1] <= w[0], "objective rose from {} to {}", w[0], w[1]);
            }
            let s = est.s_hat.matrix();
            assert!((s.transpose() * s - DMatrix::identity(8, 8)).amax() < 1e-10);
        }
    }

    #[test]
    fn rsgm_on_clean_data() {
        let b = bundle(12, 60, 4, 0, 0.0, 6);
        let est = dpcp_rsgm(&b.x_tilde, 4, &DpcpConfig::default()).unwrap();
        assert!(
            max_angle_degrees(&est.s_hat, &b.s_star)
                .unwrap()
                .to_radians()
                <= 1e-4
        );
    }

    #[test]
    fn rsgm_never_worse_than_its_start() {
        for seed in 0..5 {
            let b = bundle(20, 150, 8, 60, 0.3, 100 + seed);
            let est = dpcp_rsgm(&b.x_tilde, 8, &DpcpConfig::default()).unwrap();
            assert!(est.final_objective <= est.objective_history[0]);
        }
    }

    #[test]
    fn rank_guards() {
        let b = bundle(5, 10, 2, 0, 0.0, 1);
        for method in [
            Stage1Method::Cop,
            Stage1Method::DpcpIrls,
            Stage1Method::DpcpRsgm,
        ] {
            assert!(estimate(&b.x_tilde, 5, method, &DpcpConfig::default()).is_err());
            assert!(estimate(&b.x_tilde, 0, method, &DpcpConfig::default()).is_err());
        }
        let bad = DpcpConfig {
            beta: 1.5,
            ..DpcpConfig::default()
        };
        assert!(dpcp_irls(&b.x_tilde, 2, &bad).is_err());
    }

    #[test]
    fn method_names_parse() {
        for m in [
            Stage1Method::Cop,
            Stage1Method::DpcpIrls,
            Stage1Method::DpcpRsgm,
        ] {
            assert_eq!(m.name().parse::<Stage1Method>().unwrap(), m);
        }
        assert!("svd".parse::<Stage1Method>().is_err());
    }

    #[test]
    fn reduced_fit_keeps_clean_subspace() {
        let b = bundle(200, 30, 4, 0, 0.0, 2);
        let est = project_reduce(
            &b.x_tilde,
            Stage1Method::DpcpIrls,
            4,
            &DpcpConfig::default(),
        )
        .unwrap();
        assert!(
            max_angle_degrees(&est.s_hat, &b.s_star)
                .unwrap()
                .to_radians()
                <= 1e-6
        );
    }
}
