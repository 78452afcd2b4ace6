use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MULTISET_TOL: f64 = 1e-8;

/// `sums[ℓ−1] = Σ_i x_i^ℓ` for `ℓ = 1..=L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSumSignature {
    pub sums: Vec<f64>,
}

impl PowerSumSignature {
    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// The `ℓ`-th power sum, 1-based.
    pub fn degree(&self, l: usize) -> f64 {
        self.sums[l - 1]
    }
}

/// Pairwise (cascade) summation; error grows with `log n` instead of `n`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn power_sums(x: &[f64], l: usize) -> Result<PowerSumSignature> {
    if l == 0 {
        return Err(Error::invalid("need at least one power sum"));
    }
    let mut powers = x.to_vec();
    let mut sums = Vec::with_capacity(l);
    for degree in 1..=l {
        if degree > 1 {
            for (p, &v) in powers.iter_mut().zip(x) {
                *p *= v;
            }
        }
        sums.push(pairwise_sum(&powers));
    }
    Ok(PowerSumSignature { sums })
}

/// Whether `x1` and `x2` hold the same multiset of entries, decided by
/// comparing their first `m` power sums.
///
/// Degree `ℓ` sums agree when they differ by at most
/// `tol·m·max(1, ‖x1‖∞, ‖x2‖∞)^ℓ`.
pub fn multisets_equal_via_power_sums(x1: &[f64], x2: &[f64], tol: f64) -> Result<bool> {
    if x1.len() != x2.len() {
        return Err(Error::dims(format!(
            "lengths {} and {} differ",
            x1.len(),
            x2.len()
        )));
    }
    let m = x1.len();
    if m == 0 {
        return Ok(true);
    }
    let inf = |x: &[f64]| x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = inf(x1).max(inf(x2)).max(1.0);
    let p1 = power_sums(x1, m)?;
    let p2 = power_sums(x2, m)?;
    let mut bound = tol * m as f64;
    for (a, b) in p1.sums.iter().zip(&p2.sums) {
        bound *= scale;
        if (a - b).abs() > bound {
            return Ok(false);
        }
    }
    Ok(true)
}
