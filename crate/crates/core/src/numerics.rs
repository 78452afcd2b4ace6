//! Dense linear algebra shared by every stage: SVD, rank, principal angles,
//! least squares and orthogonal projection.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Sweep cap for the Jacobi SVD; it converges quadratically, so this is
/// never reached on finite input.
const JACOBI_MAX_SWEEPS: usize = 80;

/// Default relative threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Tolerance on `BᵀB = I` accepted by [`SubspaceBasis::from_orthonormal`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Real matrix with at least one row and one column whose entries are all
/// finite.
///
/// Derefs to [`DMatrix<f64>`] for read access; mutation goes through
/// [`DenseMatrix::from_matrix`] so the finiteness invariant holds.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid(
                "matrix must have at least one row and one column",
            ));
        }
        for j in 0..matrix.ncols() {
            for i in 0..matrix.nrows() {
                if !matrix[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(matrix))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dims(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("no columns"));
        }
        Self::from_matrix(DMatrix::from_columns(columns))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix must be non-empty");
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column_vector(&self, j: usize) -> DVector<f64> {
        self.0.column(j).into_owned()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Orthonormal basis of an `r`-dimensional subspace of `ℝ^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Wraps a matrix that already has orthonormal columns.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let (m, r) = basis.shape();
        if r == 0 || r > m {
            return Err(Error::invalid(format!(
                "basis shape {m}x{r} needs 1 <= r <= m"
            )));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(r, r)).amax();
        if err.is_nan() || err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "columns are not orthonormal (deviation {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis of the span of `columns`, which must have full
    /// column rank.
    pub fn orthonormalize(columns: &DMatrix<f64>) -> Result<Self> {
        let r = columns.ncols();
        let svd = thin_svd_raw(columns)?;
        let rank = rank_from_singular_values(&svd.singular_values, DEFAULT_RANK_TOL);
        if rank < r {
            return Err(Error::InsufficientRank {
                found: rank,
                needed: r,
            });
        }
        Self::from_orthonormal(svd.u.columns(0, r).into_owned())
    }

    /// Top `r` left singular vectors of `x`.
    pub fn principal(x: &DenseMatrix, r: usize) -> Result<Self> {
        let svd = thin_svd(x)?;
        if r == 0 || r > svd.singular_values.len() {
            return Err(Error::invalid(format!(
                "cannot take {r} principal directions"
            )));
        }
        Self::from_orthonormal(svd.u.columns(0, r).into_owned())
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.basis
    }

    /// Orthonormal basis of the orthogonal complement; `None` when the
    /// subspace is the whole space.
    pub fn complement(&self) -> Option<SubspaceBasis> {
        let (m, r) = self.basis.shape();
        if r == m {
            return None;
        }
        Some(Self {
            basis: orthogonal_complement(&self.basis),
        })
    }

    /// The subspace obtained by applying `rows` as a row gather:
    /// row `i` of the result is row `rows[i]` of this basis.
    pub fn gather_rows(&self, rows: &[usize]) -> Result<SubspaceBasis> {
        if rows.len() != self.ambient_dim() {
            return Err(Error::dims("row map length differs from ambient dimension"));
        }
        let r = self.dim();
        let basis = DMatrix::from_fn(rows.len(), r, |i, k| self.basis[(rows[i], k)]);
        Self::from_orthonormal(basis)
    }
}

/// Orthonormal basis of the complement of the column space of an
/// orthonormal `m×r` matrix, as the null eigenvectors of `BBᵀ`.
pub(crate) fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, r) = basis.shape();
    let proj = basis * basis.transpose();
    let eig = SymmetricEigen::new(proj);
    let order = ascending_order(eig.eigenvalues.as_slice());
    let c = m - r;
    let mut out = DMatrix::zeros(m, c);
    for (k, &idx) in order.iter().take(c).enumerate() {
        out.set_column(k, &eig.eigenvectors.column(idx));
    }
    reorthonormalize(out)
}

/// One Gram-Schmidt pass through QR to clean up rounding.
pub(crate) fn reorthonormalize(q: DMatrix<f64>) -> DMatrix<f64> {
    let qr = q.qr();
    let mut out = qr.q();
    let rdiag = qr.r().diagonal();
    for k in 0..out.ncols() {
        if rdiag[k] < 0.0 {
            let mut col = out.column_mut(k);
            col.neg_mut();
        }
    }
    out
}

pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Thin SVD `X = U·diag(σ)·Vᵀ` with `k = min(m, n)` components.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    /// Nonincreasing and nonnegative.
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for c in 0..k {
            us.column_mut(c).scale_mut(self.singular_values[c]);
        }
        us * self.v.transpose()
    }
}

/// Thin SVD with singular values sorted nonincreasing and each left vector
/// signed so its first nonzero entry is nonnegative.
pub fn thin_svd(x: &DenseMatrix) -> Result<ThinSvd> {
    thin_svd_raw(x.as_matrix())
}

pub(crate) fn thin_svd_raw(x: &DMatrix<f64>) -> Result<ThinSvd> {
    if x.nrows() < x.ncols() {
        let t = tall_svd(&x.transpose())?;
        return Ok(canonical_signs(t.v, t.singular_values, t.u));
    }
    let t = tall_svd(x)?;
    Ok(canonical_signs(t.u, t.singular_values, t.v))
}

/// Householder QR followed by one-sided Jacobi on the square factor, for
/// `m ≥ n`. nalgebra's bidiagonal SVD loses up to seven digits on
/// matrices with clustered singular values, which is enough to break the
/// exact-recovery checks downstream; Jacobi keeps every singular value to
/// high relative accuracy.
fn tall_svd(x: &DMatrix<f64>) -> Result<ThinSvd> {
    let (m, n) = x.shape();
    let qr = x.clone().qr();
    let mut a = qr.r();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = (n as f64).sqrt() * f64::EPSILON;
    // columns this small are numerically zero; rotating them only churns
    let negligible = (f64::EPSILON * a.norm() * n as f64).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= tol * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence(JACOBI_MAX_SWEEPS));
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut ur = DMatrix::zeros(n, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        if sigma * sigma > negligible && sigma > f64::MIN_POSITIVE {
            ur.set_column(dst, &(a.column(src) / sigma));
        } else {
            missing.push(dst);
        }
        vs.set_column(dst, &v.column(src));
        values.push(sigma);
    }
    complete_orthonormal(&mut ur, &missing);
    let u = qr.q().columns(0, n.min(m)).into_owned() * ur;
    Ok(ThinSvd {
        u,
        singular_values: values,
        v: vs,
    })
}

fn rotate_columns(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let rows = a.nrows();
    let data = a.as_mut_slice();
    let (left, right) = data.split_at_mut(q * rows);
    let cp = &mut left[p * rows..(p + 1) * rows];
    let cq = &mut right[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed zero columns with unit vectors orthogonal to the rest.
fn complete_orthonormal(u: &mut DMatrix<f64>, missing: &[usize]) {
    let n = u.nrows();
    for &col in missing {
        let mut best: Option<DVector<f64>> = None;
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            for _ in 0..2 {
                for k in 0..u.ncols() {
                    if k != col {
                        let proj = u.column(k).dot(&e);
                        e -= u.column(k) * proj;
                    }
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                best = Some(e / norm);
                break;
            }
            if best.as_ref().is_none_or(|b| b.norm() < norm) && norm > 0.0 {
                best = Some(e / norm);
            }
        }
        if let Some(b) = best {
            u.set_column(col, &b);
        }
    }
}

fn canonical_signs(mut u: DMatrix<f64>, values: Vec<f64>, mut v: DMatrix<f64>) -> ThinSvd {
    let zero = 64.0 * f64::EPSILON;
    for c in 0..u.ncols() {
        let first = u.column(c).iter().copied().find(|e| e.abs() > zero);
        if matches!(first, Some(e) if e < 0.0) {
            u.column_mut(c).neg_mut();
            v.column_mut(c).neg_mut();
        }
    }
    ThinSvd {
        u,
        singular_values: values,
        v,
    }
}

/// Number of singular values above `rel_tol·σ₁`; zero for the zero matrix.
pub fn numerical_rank(x: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    numerical_rank_raw(x.as_matrix(), rel_tol)
}

pub(crate) fn numerical_rank_raw(x: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!("rel_tol {rel_tol} outside (0, 1)")));
    }
    Ok(rank_from_singular_values(&singular_values(x)?, rel_tol))
}

/// Singular values only, nonincreasing.
pub fn singular_values(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(thin_svd_raw(x)?.singular_values)
}

pub(crate) fn rank_from_singular_values(sv: &[f64], rel_tol: f64) -> usize {
    match sv.first() {
        Some(&s1) if s1 > 0.0 => sv.iter().filter(|&&s| s > rel_tol * s1).count(),
        _ => 0,
    }
}

/// Principal angles in radians, ascending; the last entry is `θ_max`.
///
/// Angles come from the singular values of `AᵀB` (cosines). For angles
/// below 45° the sines, taken from `(I − AAᵀ)B`, resolve the angle to full
/// precision where `arccos` would lose half the digits.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() || a.dim() != b.dim() {
        return Err(Error::dims(format!(
            "subspaces {}x{} and {}x{} differ in shape",
            a.ambient_dim(),
            a.dim(),
            b.ambient_dim(),
            b.dim()
        )));
    }
    let cross = a.matrix().transpose() * b.matrix();
    let cosines = singular_values(&cross)?;
    let residual = b.matrix() - a.matrix() * &cross;
    let mut sines = singular_values(&residual)?;
    sines.reverse();
    let angles = cosines
        .iter()
        .zip(sines.iter())
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            if c * c > 0.5 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Largest principal angle in degrees.
pub fn max_angle_degrees(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    let angles = principal_angles(a, b)?;
    Ok(angles.last().copied().unwrap_or(0.0).to_degrees())
}

/// Moore-Penrose pseudoinverse built once and applied many times.
#[derive(Clone, Debug)]
pub struct Pseudoinverse {
    pinv: DMatrix<f64>,
}

impl Pseudoinverse {
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let svd = thin_svd_raw(a)?;
        let rank = rank_from_singular_values(&svd.singular_values, rel_tol);
        let (m, n) = a.shape();
        let mut pinv = DMatrix::zeros(n, m);
        for k in 0..rank {
            let scaled = svd.v.column(k) / svd.singular_values[k];
            pinv += scaled * svd.u.column(k).transpose();
        }
        Ok(Self { pinv })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.pinv * b
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pinv
    }
}

/// Minimum-norm least-squares solution of `Aθ ≈ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::dims(format!(
            "A has {} rows, b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("least squares needs m >= 1 and r >= 1"));
    }
    Ok(Pseudoinverse::new(a, DEFAULT_RANK_TOL)?.solve(b))
}

/// Orthogonal projection of `x` onto `s` and the norm of what is left.
pub fn project_onto(s: &SubspaceBasis, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if x.len() != s.ambient_dim() {
        return Err(Error::dims(format!(
            "vector of length {} against ambient dimension {}",
            x.len(),
            s.ambient_dim()
        )));
    }
    let b = s.matrix();
    let proj = b * (b.transpose() * x);
    let residual = (x - &proj).norm();
    Ok((proj, residual))
}
