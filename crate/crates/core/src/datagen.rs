//! Seeded synthetic instances: random subspaces, unit-norm inliers, sparse
//! coordinate permutations, additive noise and observation patterns.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, SubspaceBasis};
use crate::seed::rng_from_seed;

/// Bijection on `{0, …, m−1}`; `image[i]` is where coordinate `i` goes.
///
/// As a matrix Π this is `Π e_i = e_{image[i]}`, so `(Πx)[image[i]] = x[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let m = image.len();
        if m == 0 {
            return Err(Error::invalid("permutation of an empty set"));
        }
        let mut seen = vec![false; m];
        for &p in &image {
            if p >= m || seen[p] {
                return Err(Error::invalid(format!(
                    "{image:?} is not a bijection on 0..{m}"
                )));
            }
            seen[p] = true;
        }
        Ok(Self { image })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            image: (0..m).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn get(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Coordinates that move.
    pub fn support(&self) -> Vec<usize> {
        self.image
            .iter()
            .enumerate()
            .filter(|(i, p)| i != *p)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &p) in self.image.iter().enumerate() {
            inv[p] = i;
        }
        Self { image: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::dims("composing permutations of different sizes"));
        }
        Ok(Self {
            image: other.image.iter().map(|&i| self.image[i]).collect(),
        })
    }

    /// `Πx`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.len(),
            "vector length must match permutation size"
        );
        let mut out = vec![0.0; x.len()];
        for (i, &p) in self.image.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }

    pub fn apply_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.apply(x.as_slice()))
    }

    /// `ΠX`, permuting rows.
    pub fn apply_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(
            x.nrows(),
            self.len(),
            "row count must match permutation size"
        );
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, &p) in self.image.iter().enumerate() {
            out.set_row(p, &x.row(i));
        }
        out
    }

    /// Every permutation of `m` elements in lexicographic order of images.
    pub fn all(m: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..m).collect();
        loop {
            out.push(Permutation {
                image: current.clone(),
            });
            if !next_permutation(&mut current) {
                break;
            }
        }
        out
    }
}

/// Advances to the next lexicographic permutation; false after the last.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// A permutation drawn over an explicitly chosen coordinate set.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePermutation {
    pub permutation: Permutation,
    /// Coordinates allowed to move, sorted. The realized support can be
    /// smaller because a uniform permutation may fix some of them.
    pub chosen: Vec<usize>,
}

impl SparsePermutation {
    pub fn realized_support(&self) -> usize {
        self.permutation.support().len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    Noiseless,
    Db(f64),
}

/// How outlier columns are produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierModel {
    /// Coordinates of an inlier are shuffled by an α-sparse permutation.
    #[default]
    Permuted,
    /// The column is replaced by a uniform draw from the unit sphere.
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub n_total: usize,
    pub n_out: usize,
    pub alpha: f64,
    pub snr: Snr,
    pub seed: u64,
    #[serde(default)]
    pub outlier_model: OutlierModel,
}

impl CorruptionSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.n_out > self.n_total {
            return Err(Error::invalid(format!(
                "n_out = {} exceeds n_total = {}",
                self.n_out, self.n_total
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.outlier_model == OutlierModel::Permuted && self.n_out > 0 {
            let k = support_size(m, self.alpha);
            if k == 1 {
                return Err(Error::invalid(format!(
                    "alpha {} on m = {m} moves a single coordinate",
                    self.alpha
                )));
            }
        }
        if let Snr::Db(db) = self.snr {
            if !db.is_finite() {
                return Err(Error::invalid("snr_db must be finite"));
            }
        }
        Ok(())
    }
}

/// Ground truth together with its corrupted observation.
#[derive(Clone, Debug)]
pub struct GroundTruthBundle {
    pub x_star: DenseMatrix,
    pub s_star: SubspaceBasis,
    /// One per column; identity for inliers.
    pub permutations: Vec<Permutation>,
    pub x_tilde: DenseMatrix,
    /// True where the observed column still lies in `S*` up to noise.
    pub inlier_mask: Vec<bool>,
    /// Realized fraction of moved coordinates per column.
    pub realized_alpha: Vec<f64>,
    /// Frobenius norm of the added noise.
    pub noise_norm: f64,
}

impl GroundTruthBundle {
    /// Mean realized sparsity over outlier columns; zero without outliers.
    pub fn realized_alpha_mean(&self, n_out: usize) -> f64 {
        if n_out == 0 {
            return 0.0;
        }
        let start = self.realized_alpha.len() - n_out;
        self.realized_alpha[start..].iter().sum::<f64>() / n_out as f64
    }
}

pub(crate) fn support_size(m: usize, alpha: f64) -> usize {
    (alpha * m as f64).round() as usize
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Uniform draw from the Grassmannian of `r`-planes in `ℝ^m`.
pub fn sample_subspace(m: usize, r: usize, seed: u64) -> Result<SubspaceBasis> {
    sample_subspace_with_rng(m, r, &mut rng_from_seed(seed))
}

pub fn sample_subspace_with_rng<R: Rng + ?Sized>(
    m: usize,
    r: usize,
    rng: &mut R,
) -> Result<SubspaceBasis> {
    if r == 0 || r >= m {
        return Err(Error::invalid(format!(
            "need 1 <= r < m, got r = {r}, m = {m}"
        )));
    }
    loop {
        let g = gaussian_matrix(m, r, rng);
        match SubspaceBasis::orthonormalize(&g) {
            Ok(basis) => return Ok(basis),
            Err(Error::InsufficientRank { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// `count` points drawn uniformly from the unit sphere of `S`.
pub fn sample_inliers(s: &SubspaceBasis, count: usize, seed: u64) -> Result<DenseMatrix> {
    sample_inliers_with_rng(s, count, &mut rng_from_seed(seed))
}

pub fn sample_inliers_with_rng<R: Rng + ?Sized>(
    s: &SubspaceBasis,
    count: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if count == 0 {
        return Err(Error::invalid("need at least one inlier"));
    }
    let (m, r) = (s.ambient_dim(), s.dim());
    let mut out = DMatrix::zeros(m, count);
    for j in 0..count {
        let col = loop {
            let g = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut *rng));
            let x = s.matrix() * g;
            let norm = x.norm();
            if norm > 0.0 {
                break x / norm;
            }
        };
        out.set_column(j, &col);
    }
    DenseMatrix::from_matrix(out)
}

fn sphere_point<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut *rng));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Picks `round(αm)` coordinates uniformly and shuffles them uniformly.
pub fn sample_sparse_permutation(m: usize, alpha: f64, seed: u64) -> Result<SparsePermutation> {
    sample_sparse_permutation_with_rng(m, alpha, &mut rng_from_seed(seed))
}

pub fn sample_sparse_permutation_with_rng<R: Rng + ?Sized>(
    m: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<SparsePermutation> {
    if m == 0 {
        return Err(Error::invalid("m must be positive"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let k = support_size(m, alpha);
    if k == 1 {
        return Err(Error::invalid(format!(
            "alpha {alpha} on m = {m} moves a single coordinate"
        )));
    }
    let mut chosen = rand::seq::index::sample(rng, m, k).into_vec();
    chosen.sort_unstable();
    let mut targets = chosen.clone();
    targets.shuffle(rng);
    let mut image: Vec<usize> = (0..m).collect();
    for (&from, &to) in chosen.iter().zip(&targets) {
        image[from] = to;
    }
    Ok(SparsePermutation {
        permutation: Permutation { image },
        chosen,
    })
}

/// Corrupts the trailing `n_out` columns of `x_star` and adds noise.
///
/// Noise is isotropic Gaussian scaled so that
/// `20·log10(‖X*‖_F / ‖N‖_F) = snr_db` over the whole matrix.
pub fn corrupt(x_star: &DenseMatrix, r: usize, spec: &CorruptionSpec) -> Result<GroundTruthBundle> {
    let s_star = SubspaceBasis::principal(x_star, r)?;
    corrupt_with_rng(x_star, s_star, spec, &mut rng_from_seed(spec.seed))
}

pub fn corrupt_with_rng<R: Rng + ?Sized>(
    x_star: &DenseMatrix,
    s_star: SubspaceBasis,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<GroundTruthBundle> {
    let (m, n) = (x_star.rows(), x_star.cols());
    if n != spec.n_total {
        return Err(Error::dims(format!(
            "x_star has {n} columns, spec says {}",
            spec.n_total
        )));
    }
    if s_star.ambient_dim() != m {
        return Err(Error::dims(
            "subspace and data disagree on the ambient dimension",
        ));
    }
    spec.validate(m)?;
    let n_in = n - spec.n_out;
    let mut x_tilde = x_star.as_matrix().clone();
    let mut permutations = vec![Permutation::identity(m); n];
    let mut inlier_mask = vec![true; n];
    let mut realized_alpha = vec![0.0; n];
    for j in n_in..n {
        match spec.outlier_model {
            OutlierModel::Permuted => {
                let sp = sample_sparse_permutation_with_rng(m, spec.alpha, rng)?;
                let moved = sp.permutation.apply(x_star.column(j).as_slice());
                x_tilde.set_column(j, &DVector::from_vec(moved));
                realized_alpha[j] = sp.realized_support() as f64 / m as f64;
                inlier_mask[j] = sp.permutation.is_identity();
                permutations[j] = sp.permutation;
            }
            OutlierModel::Sphere => {
                x_tilde.set_column(j, &sphere_point(m, rng));
                inlier_mask[j] = false;
            }
        }
    }
    let mut noise_norm = 0.0;
    if let Snr::Db(db) = spec.snr {
        let noise = gaussian_matrix(m, n, rng);
        let raw = noise.norm();
        if raw > 0.0 {
            let target = x_star.as_matrix().norm() / 10f64.powf(db / 20.0);
            let scaled = noise * (target / raw);
            noise_norm = scaled.norm();
            x_tilde += scaled;
        }
    }
    Ok(GroundTruthBundle {
        x_star: x_star.clone(),
        s_star,
        permutations,
        x_tilde: DenseMatrix::from_matrix(x_tilde)?,
        inlier_mask,
        realized_alpha,
        noise_norm,
    })
}

/// Samples `S*`, `n_total` inliers on it and corrupts them, all from one seed.
pub fn generate(m: usize, r: usize, spec: &CorruptionSpec) -> Result<GroundTruthBundle> {
    generate_with_rng(m, r, spec, &mut rng_from_seed(spec.seed))
}

pub fn generate_with_rng<R: Rng + ?Sized>(
    m: usize,
    r: usize,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<GroundTruthBundle> {
    spec.validate(m)?;
    let s_star = sample_subspace_with_rng(m, r, rng)?;
    let x_star = sample_inliers_with_rng(&s_star, spec.n_total, rng)?;
    corrupt_with_rng(&x_star, s_star, spec, rng)
}

/// Observed coordinate sets `ω_j ⊆ [m]`, one per column, sorted and
/// deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPattern {
    m: usize,
    omegas: Vec<Vec<usize>>,
}

impl ObservationPattern {
    pub fn new(m: usize, omegas: Vec<Vec<usize>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(omegas.len());
        for (j, mut w) in omegas.into_iter().enumerate() {
            if let Some(&bad) = w.iter().find(|&&i| i >= m) {
                return Err(Error::invalid(format!(
                    "column {j}: row {bad} outside [0, {m})"
                )));
            }
            w.sort_unstable();
            w.dedup();
            clean.push(w);
        }
        Ok(Self { m, omegas: clean })
    }

    pub fn full(m: usize, n: usize) -> Self {
        Self {
            m,
            omegas: vec![(0..m).collect(); n],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.omegas.len()
    }

    pub fn omega(&self, j: usize) -> &[usize] {
        &self.omegas[j]
    }

    pub fn omegas(&self) -> &[Vec<usize>] {
        &self.omegas
    }

    /// Sub-pattern on the listed columns.
    pub fn restrict(&self, columns: &[usize]) -> Self {
        Self {
            m: self.m,
            omegas: columns.iter().map(|&j| self.omegas[j].clone()).collect(),
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.omegas[j].binary_search(&i).is_ok()
    }
}

/// Uniformly random `per_column_count`-subsets, one per column.
pub fn sample_observation_pattern(
    m: usize,
    n: usize,
    per_column_count: usize,
    seed: u64,
) -> Result<ObservationPattern> {
    if per_column_count > m {
        return Err(Error::invalid(format!(
            "cannot observe {per_column_count} of {m} rows"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let omegas = (0..n)
        .map(|_| rand::seq::index::sample(&mut rng, m, per_column_count).into_vec())
        .collect();
    ObservationPattern::new(m, omegas)
}

/// Zeroes every entry outside `Ω`.
pub fn apply_pattern(x: &DenseMatrix, omega: &ObservationPattern) -> Result<DenseMatrix> {
    if x.rows() != omega.m() || x.cols() != omega.n() {
        return Err(Error::dims(format!(
            "matrix {}x{} against pattern {}x{}",
            x.rows(),
            x.cols(),
            omega.m(),
            omega.n()
        )));
    }
    let mut out = DMatrix::zeros(x.rows(), x.cols());
    for j in 0..x.cols() {
        for &i in omega.omega(j) {
            out[(i, j)] = x[(i, j)];
        }
    }
    DenseMatrix::from_matrix(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{principal_angles, project_onto};
    use crate::theory::power_sums;

    fn spec(n: usize, n_out: usize, alpha: f64, snr: Snr, seed: u64) -> CorruptionSpec {
        CorruptionSpec {
            n_total: n,
            n_out,
            alpha,
            snr,
            seed,
            outlier_model: OutlierModel::Permuted,
        }
    }

    #[test]
    fn subspace_sampling() {
        let b = sample_subspace(2, 1, 4).unwrap();
        assert!((b.matrix().column(0).norm() - 1.0).abs() < 1e-15);
        assert_eq!(
            sample_subspace(10, 3, 9).unwrap(),
            sample_subspace(10, 3, 9).unwrap()
        );
        assert!(sample_subspace(3, 3, 0).is_err());
    }

    #[test]
    fn grassmannian_samples_are_spread_out() {
        // Consecutive draws of 25-planes in R^50 are almost surely far apart;
        // the largest angle between independent uniform samples sits near 90°.
        let mut prev = sample_subspace(50, 25, 0).unwrap();
        let mut sum = 0.0;
        for seed in 1..200 {
            let next = sample_subspace(50, 25, seed).unwrap();
            let angles = principal_angles(&prev, &next).unwrap();
            let max = *angles.last().unwrap();
            assert!(max > 1e-3);
            sum += max.to_degrees();
            prev = next;
        }
        let mean = sum / 199.0;
        assert!(mean > 80.0, "mean largest angle {mean}");
    }

    #[test]
    fn inliers_are_unit_and_in_subspace() {
        let s = sample_subspace(8, 3, 1).unwrap();
        let x = sample_inliers(&s, 40, 2).unwrap();
        for j in 0..40 {
            let col = x.column_vector(j);
            assert!((col.norm() - 1.0).abs() < 1e-12);
            let (_, res) = project_onto(&s, &col).unwrap();
            assert!(res < 1e-12);
        }
        let line = sample_subspace(5, 1, 3).unwrap();
        let x = sample_inliers(&line, 10, 4).unwrap();
        let b = line.matrix().column(0);
        for j in 0..10 {
            let d = x.column(j).dot(&b);
            assert!((d.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_permutation_cases() {
        assert!(sample_sparse_permutation(10, 0.0, 1)
            .unwrap()
            .permutation
            .is_identity());
        let mut saw_swap = false;
        for seed in 0..20 {
            let p = sample_sparse_permutation(2, 1.0, seed).unwrap().permutation;
            if !p.is_identity() {
                assert_eq!(p.image(), &[1, 0]);
                saw_swap = true;
            }
        }
        assert!(saw_swap);
        for seed in 0..50 {
            let sp = sample_sparse_permutation(10, 0.4, seed).unwrap();
            assert_eq!(sp.chosen.len(), 4);
            assert!(sp
                .permutation
                .support()
                .iter()
                .all(|i| sp.chosen.contains(i)));
        }
        assert!(sample_sparse_permutation(10, 0.1, 0).is_err());
    }

    #[test]
    fn group_axioms() {
        let mut rng = rng_from_seed(5);
        for _ in 0..1000 {
            let m = rng.random_range(1..12);
            let mut img: Vec<usize> = (0..m).collect();
            img.shuffle(&mut rng);
            let p = Permutation::new(img).unwrap();
            assert!(p.compose(&p.inverse()).unwrap().is_identity());
            assert!(p.inverse().compose(&p).unwrap().is_identity());
            let x: Vec<f64> = (0..m).map(|i| i as f64).collect();
            assert_eq!(p.inverse().apply(&p.apply(&x)), x);
        }
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert_eq!(Permutation::all(3).len(), 6);
    }

    #[test]
    fn corrupt_noiseless_without_outliers_is_exact() {
        let s = sample_subspace(6, 2, 1).unwrap();
        let x = sample_inliers(&s, 12, 2).unwrap();
        let b = corrupt(&x, 2, &spec(12, 0, 0.5, Snr::Noiseless, 3)).unwrap();
        assert_eq!(b.x_tilde, x);
        assert!(b.inlier_mask.iter().all(|&v| v));
    }

    #[test]
    fn corrupt_snr_matches_formula() {
        let s = sample_subspace(20, 4, 1).unwrap();
        let x = sample_inliers(&s, 60, 2).unwrap();
        let b = corrupt(&x, 4, &spec(60, 20, 0.3, Snr::Db(40.0), 3)).unwrap();
        let mut permuted = x.as_matrix().clone();
        for j in 0..60 {
            permuted.set_column(j, &b.permutations[j].apply_vector(&x.column_vector(j)));
        }
        let ratio = (b.x_tilde.as_matrix() - permuted).norm() / x.as_matrix().norm();
        assert!((ratio / 1e-2 - 1.0).abs() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn dense_permutation_preserves_column_multisets() {
        let s = sample_subspace(7, 2, 1).unwrap();
        let x = sample_inliers(&s, 15, 2).unwrap();
        let b = corrupt(&x, 2, &spec(15, 15, 1.0, Snr::Noiseless, 8)).unwrap();
        for j in 0..15 {
            let p1 = power_sums(x.column(j).as_slice(), 7).unwrap();
            let p2 = power_sums(b.x_tilde.column(j).as_slice(), 7).unwrap();
            for (a, c) in p1.sums.iter().zip(&p2.sums) {
                assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
            }
            let mut s1: Vec<f64> = x.column(j).iter().copied().collect();
            let mut s2: Vec<f64> = b.x_tilde.column(j).iter().copied().collect();
            s1.sort_by(f64::total_cmp);
            s2.sort_by(f64::total_cmp);
            assert_eq!(s1, s2);
        }
    }

    #[test]
    fn corrupt_is_reproducible() {
        let sp = spec(50, 30, 0.2, Snr::Db(30.0), 77);
        let a = generate(12, 3, &sp).unwrap();
        let b = generate(12, 3, &sp).unwrap();
        assert_eq!(a.x_tilde, b.x_tilde);
        assert_eq!(a.permutations, b.permutations);
    }

    #[test]
    fn pattern_cases() {
        let x = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            apply_pattern(&x, &ObservationPattern::full(2, 2)).unwrap(),
            x
        );
        let empty = ObservationPattern::new(2, vec![vec![], vec![]]).unwrap();
        assert_eq!(apply_pattern(&x, &empty).unwrap(), DenseMatrix::zeros(2, 2));
        let single = ObservationPattern::new(2, vec![vec![], vec![1]]).unwrap();
        let y = apply_pattern(&x, &single).unwrap();
        assert_eq!(y.as_matrix().as_slice(), &[0.0, 0.0, 0.0, 4.0]);

        let p = ObservationPattern::new(4, vec![vec![3, 1, 1]]).unwrap();
        assert_eq!(p.omega(0), &[1, 3]);
        assert!(ObservationPattern::new(2, vec![vec![2]]).is_err());
        let sampled = sample_observation_pattern(6, 5, 3, 1).unwrap();
        assert!(sampled.omegas().iter().all(|w| w.len() == 3));
        assert!(sample_observation_pattern(3, 1, 4, 0).is_err());
    }
}
