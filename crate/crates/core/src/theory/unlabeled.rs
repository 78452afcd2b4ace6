use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::Permutation;
use crate::error::{Error, Result};
use crate::numerics::{
    numerical_rank_raw, rank_from_singular_values, singular_values, thin_svd, DenseMatrix,
    Pseudoinverse, DEFAULT_RANK_TOL,
};

use super::power_sums::power_sums;

/// Largest number of permutation tuples `(m!)^n` an enumeration may visit.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Entrywise tolerance for "same matrix" comparisons.
const MATCH_TOL: f64 = 1e-9;

/// Tolerance used to merge equal factorizations.
const DEDUP_TOL: f64 = 1e-8;

fn factorial(m: usize) -> u64 {
    (1..=m as u64).product()
}

fn tuple_count(m: usize, n: usize) -> Result<u64> {
    let per = factorial(m);
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total
            .checked_mul(per)
            .filter(|&t| t <= ENUMERATION_LIMIT)
            .ok_or_else(|| {
                Error::GuardExceeded(format!(
                    "({m}!)^{n} permutation tuples exceed {ENUMERATION_LIMIT}"
                ))
            })?;
    }
    Ok(total)
}

/// Decodes tuple number `index` into per-column permutation indices.
fn decode(mut index: u64, n: usize, base: u64) -> Vec<usize> {
    let mut digits = vec![0; n];
    for d in digits.iter_mut() {
        *d = (index % base) as usize;
        index /= base;
    }
    digits
}

fn apply_tuple(x: &DMatrix<f64>, perms: &[Permutation], digits: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (j, &d) in digits.iter().enumerate() {
        let col = perms[d].apply(x.column(j).as_slice());
        out.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    out
}

/// Global row permutation `Π` with `Y = ΠX` entrywise, if one exists.
fn global_permutation(y: &DMatrix<f64>, x: &DMatrix<f64>, perms: &[Permutation]) -> Option<usize> {
    let scale = x.amax().max(1.0);
    perms
        .iter()
        .position(|p| (p.apply_rows(x) - y).amax() <= MATCH_TOL * scale)
}

/// Outcome of checking that only global row permutations of `X*` reach
/// rank `r`.
#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub total_tuples_checked: u64,
    pub min_rank_found: usize,
    /// Tuples, as per-column images, whose permuted matrix has rank `r`.
    pub equality_tuples: Vec<Vec<Vec<usize>>>,
    pub all_equality_tuples_are_global: bool,
    /// `m!`, the count expected for generic data.
    pub expected_equality_count: u64,
    /// Tuples of rank below `r`, or of rank `r` that are not global.
    pub counterexamples: Vec<Vec<Vec<usize>>>,
    /// Smallest `σ_{r+1}/σ_1` over tuples of rank above `r`.
    pub min_excess_margin: f64,
    /// Largest `σ_{r+1}/σ_1` over rank-`r` tuples.
    pub max_equality_margin: f64,
    /// Rank never below `r`, rank-`r` tuples all global, and their number is
    /// exactly `m!`.
    pub passed: bool,
}

struct TupleOutcome {
    digits: Vec<usize>,
    rank: usize,
    margin: f64,
    global: bool,
}

/// Visits every `π ∈ P_m^n` and checks `rank π(X*) ≥ r`, with equality
/// exactly at the global row permutations `ΠX*`.
pub fn verify_theorem1(x_star: &DenseMatrix, r: usize) -> Result<Theorem1Report> {
    let (m, n) = (x_star.rows(), x_star.cols());
    let total = tuple_count(m, n)?;
    let x = x_star.as_matrix();
    let rank = numerical_rank_raw(x, DEFAULT_RANK_TOL)?;
    if rank != r {
        return Err(Error::invalid(format!(
            "x_star has numerical rank {rank}, expected {r}"
        )));
    }
    let perms = Permutation::all(m);
    let base = perms.len() as u64;
    let outcomes: Vec<TupleOutcome> = (0..total)
        .into_par_iter()
        .map(|index| {
            let digits = decode(index, n, base);
            let y = apply_tuple(x, &perms, &digits);
            let sv = singular_values(&y)?;
            let rank = rank_from_singular_values(&sv, DEFAULT_RANK_TOL);
            let margin = match (sv.first(), sv.get(r)) {
                (Some(&s1), Some(&s)) if s1 > 0.0 => s / s1,
                _ => 0.0,
            };
            let global = rank <= r && global_permutation(&y, x, &perms).is_some();
            Ok(TupleOutcome {
                digits,
                rank,
                margin,
                global,
            })
        })
        .collect::<Result<_>>()?;

    let images = |digits: &[usize]| -> Vec<Vec<usize>> {
        digits.iter().map(|&d| perms[d].image().to_vec()).collect()
    };
    let mut report = Theorem1Report {
        m,
        n,
        r,
        total_tuples_checked: total,
        min_rank_found: usize::MAX,
        equality_tuples: Vec::new(),
        all_equality_tuples_are_global: true,
        expected_equality_count: factorial(m),
        counterexamples: Vec::new(),
        min_excess_margin: f64::INFINITY,
        max_equality_margin: 0.0,
        passed: false,
    };
    for o in &outcomes {
        report.min_rank_found = report.min_rank_found.min(o.rank);
        if o.rank < r {
            report.counterexamples.push(images(&o.digits));
        } else if o.rank == r {
            report.equality_tuples.push(images(&o.digits));
            report.max_equality_margin = report.max_equality_margin.max(o.margin);
            if !o.global {
                report.all_equality_tuples_are_global = false;
                report.counterexamples.push(images(&o.digits));
            }
        } else {
            report.min_excess_margin = report.min_excess_margin.min(o.margin);
        }
    }
    report.passed = report.min_rank_found >= r
        && report.all_equality_tuples_are_global
        && report.equality_tuples.len() as u64 == report.expected_equality_count;
    Ok(report)
}

/// `X = BC` with the top `r×r` block of `B` exactly the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl Factorization {
    pub fn new(b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let r = b.ncols();
        if c.nrows() != r || b.nrows() < r {
            return Err(Error::dims(format!(
                "B is {}x{}, C is {}x{}",
                b.nrows(),
                r,
                c.nrows(),
                c.ncols()
            )));
        }
        for i in 0..r {
            for k in 0..r {
                if b[(i, k)] != if i == k { 1.0 } else { 0.0 } {
                    return Err(Error::invalid("top block of B is not the identity"));
                }
            }
        }
        Ok(Self { b, c })
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn rank(&self) -> usize {
        self.b.ncols()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.b * &self.c
    }

    /// Same `B` with a different `C`.
    pub fn with_c(&self, c: DMatrix<f64>) -> Result<Self> {
        Self::new(self.b.clone(), c)
    }
}

/// The unique factorization of a rank-`r` matrix whose column space
/// survives projection onto the first `r` coordinates.
pub fn canonical_factorization(x: &DenseMatrix, r: usize) -> Result<Factorization> {
    let (m, n) = (x.rows(), x.cols());
    if r == 0 || r > m.min(n) {
        return Err(Error::invalid(format!(
            "rank {r} impossible for a {m}x{n} matrix"
        )));
    }
    let svd = thin_svd(x)?;
    let u = svd.u.columns(0, r).into_owned();
    let top = u.rows(0, r).into_owned();
    // U has orthonormal columns, so the block's singular values lie in [0, 1]
    if singular_values(&top)?
        .last()
        .is_none_or(|&s| s <= DEFAULT_RANK_TOL)
    {
        return Err(Error::ProjectionDropsDimension(r));
    }
    let top_inv = top
        .try_inverse()
        .ok_or(Error::ProjectionDropsDimension(r))?;
    let mut b = u * top_inv;
    for i in 0..r {
        for k in 0..r {
            b[(i, k)] = if i == k { 1.0 } else { 0.0 };
        }
    }
    let c = Pseudoinverse::new(&b, DEFAULT_RANK_TOL)?.matrix() * x.as_matrix();
    Factorization::new(b, c)
}

/// `res[(ℓ−1, j)] = Σ_i (b_iᵀc_j)^ℓ − Σ_i x̃_ij^ℓ` for `ℓ = 1..=m`.
pub fn power_sum_residual(fact: &Factorization, x_tilde: &DenseMatrix) -> Result<DenseMatrix> {
    let z = fact.reconstruct();
    if z.shape() != x_tilde.shape() {
        return Err(Error::dims(format!(
            "factorization gives {}x{}, data is {}x{}",
            z.nrows(),
            z.ncols(),
            x_tilde.rows(),
            x_tilde.cols()
        )));
    }
    let (m, n) = z.shape();
    let mut res = DMatrix::zeros(m, n);
    for j in 0..n {
        let pz = power_sums(z.column(j).as_slice(), m)?;
        let px = power_sums(x_tilde.column(j).as_slice(), m)?;
        for l in 0..m {
            res[(l, j)] = pz.sums[l] - px.sums[l];
        }
    }
    DenseMatrix::from_matrix(res)
}

/// Per-entry scale `m·max(1, ‖x̃_j‖∞)^ℓ` for the residuals of
/// [`power_sum_residual`].
pub fn power_sum_scale(x_tilde: &DenseMatrix) -> DMatrix<f64> {
    let (m, n) = x_tilde.shape();
    DMatrix::from_fn(m, n, |l, j| {
        let s = x_tilde.column(j).amax().max(1.0);
        m as f64 * s.powi(l as i32 + 1)
    })
}

/// `max |res| / scale` entrywise.
pub fn max_scaled_residual(res: &DenseMatrix, x_tilde: &DenseMatrix) -> f64 {
    let scale = power_sum_scale(x_tilde);
    res.as_matrix().zip_map(&scale, |a, s| a.abs() / s).max()
}

#[derive(Clone, Debug)]
pub struct UnlabeledSolution {
    /// Per-column images of the first tuple that produced this solution.
    pub tuple: Vec<Vec<usize>>,
    pub factorization: Factorization,
}

#[derive(Clone, Debug)]
pub struct UnlabeledEnumeration {
    pub total_tuples_checked: u64,
    /// Tuples with `rank π(X̃) ≤ r`.
    pub low_rank_tuples: usize,
    /// Distinct canonical factorizations of the low-rank tuples.
    pub solutions: Vec<UnlabeledSolution>,
    /// Low-rank tuples whose matrix has no canonical form.
    pub canonical_failures: Vec<Vec<Vec<usize>>>,
}

/// Solves the rank-minimization over all of `P_m^n` exactly: every tuple
/// reaching rank at most `r` contributes its canonical factorization, and
/// equal factorizations are merged.
pub fn enumerate_unlabeled_factorizations(
    x_tilde: &DenseMatrix,
    r: usize,
) -> Result<UnlabeledEnumeration> {
    let (m, n) = (x_tilde.rows(), x_tilde.cols());
    let total = tuple_count(m, n)?;
    if r == 0 || r > m.min(n) {
        return Err(Error::invalid(format!(
            "rank {r} impossible for a {m}x{n} matrix"
        )));
    }
    let x = x_tilde.as_matrix();
    let perms = Permutation::all(m);
    let base = perms.len() as u64;
    type Found = Option<(Vec<usize>, Result<Factorization>)>;
    let found: Vec<Found> = (0..total)
        .into_par_iter()
        .map(|index| -> Result<Found> {
            let digits = decode(index, n, base);
            let y = apply_tuple(x, &perms, &digits);
            if numerical_rank_raw(&y, DEFAULT_RANK_TOL)? > r {
                return Ok(None);
            }
            let fact = canonical_factorization(&DenseMatrix::from_matrix(y)?, r);
            Ok(Some((digits, fact)))
        })
        .collect::<Result<_>>()?;

    let images = |digits: &[usize]| -> Vec<Vec<usize>> {
        digits.iter().map(|&d| perms[d].image().to_vec()).collect()
    };
    let mut out = UnlabeledEnumeration {
        total_tuples_checked: total,
        low_rank_tuples: 0,
        solutions: Vec::new(),
        canonical_failures: Vec::new(),
    };
    for (digits, fact) in found.into_iter().flatten() {
        out.low_rank_tuples += 1;
        match fact {
            Ok(f) => {
                let duplicate = out.solutions.iter().any(|s| {
                    (s.factorization.b() - f.b()).amax() <= DEDUP_TOL
                        && (s.factorization.c() - f.c()).amax() <= DEDUP_TOL
                });
                if !duplicate {
                    out.solutions.push(UnlabeledSolution {
                        tuple: images(&digits),
                        factorization: f,
                    });
                }
            }
            Err(Error::ProjectionDropsDimension(_)) => out.canonical_failures.push(images(&digits)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
