use std::collections::HashMap;

use serde::Serialize;

use crate::datagen::ObservationPattern;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

use super::power_sums::power_sums;
use super::unlabeled::Factorization;

/// Row guard for the `2^m` subset enumeration.
pub const MAX_PATTERN_ROWS: usize = 22;
/// Column guard for the partition search.
pub const MAX_PATTERN_COLUMNS: usize = 12;
/// Subset evaluations allowed in one hypothesis search.
const SEARCH_BUDGET: u64 = 200_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SlmfViolation {
    /// `Σ_j max{#(ω_j ∩ I) − r, 0} > #I − r` at these rows.
    Inequality {
        rows: Vec<usize>,
        lhs: usize,
        rhs: usize,
    },
    /// The sum at `I = [m]` differs from `m − r`.
    Equality { lhs: usize, rhs: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SlmfCheck {
    pub holds: bool,
    pub violation: Option<SlmfViolation>,
}

fn mask_of(rows: &[usize]) -> u32 {
    rows.iter().fold(0, |acc, &i| acc | 1 << i)
}

fn rows_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

fn excess(col: u32, rows: u32, r: usize) -> usize {
    ((col & rows).count_ones() as usize).saturating_sub(r)
}

/// First `I` breaking the inequality. Only `I` inside the union of the
/// columns need checking: rows outside it raise `#I − r` and leave the
/// left side unchanged.
fn inequality_violation(cols: &[u32], r: usize, work: &mut u64) -> Option<SlmfViolation> {
    let union = cols.iter().fold(0u32, |a, &c| a | c);
    let mut sub = union;
    loop {
        *work += 1;
        let size = sub.count_ones() as usize;
        if size > r {
            let lhs: usize = cols.iter().map(|&c| excess(c, sub, r)).sum();
            if lhs > size - r {
                return Some(SlmfViolation::Inequality {
                    rows: rows_of(sub),
                    lhs,
                    rhs: size - r,
                });
            }
        }
        if sub == 0 {
            return None;
        }
        sub = (sub - 1) & union;
    }
}

fn slmf_masks(m: usize, cols: &[u32], r: usize, work: &mut u64) -> SlmfCheck {
    let full = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let lhs: usize = cols.iter().map(|&c| excess(c, full, r)).sum();
    let violation = if lhs != m.saturating_sub(r) || m < r {
        Some(SlmfViolation::Equality {
            lhs,
            rhs: m.saturating_sub(r),
        })
    } else {
        inequality_violation(cols, r, work)
    };
    SlmfCheck {
        holds: violation.is_none(),
        violation,
    }
}

fn check_guards(pattern: &ObservationPattern, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    if pattern.m() > MAX_PATTERN_ROWS {
        return Err(Error::GuardExceeded(format!(
            "m = {} exceeds {MAX_PATTERN_ROWS} rows",
            pattern.m()
        )));
    }
    Ok(())
}

/// Tests the relaxed-SLMF condition on every column of `pattern`.
pub fn is_relaxed_slmf(pattern: &ObservationPattern, r: usize) -> Result<SlmfCheck> {
    check_guards(pattern, r)?;
    let cols: Vec<u32> = pattern.omegas().iter().map(|w| mask_of(w)).collect();
    Ok(slmf_masks(pattern.m(), &cols, r, &mut 0))
}

/// One group of a partition and the sub-pattern inside it that passes the
/// relaxed-SLMF test. Columns absent from `sub_pattern` were dropped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupWitness {
    pub columns: Vec<usize>,
    pub sub_pattern: Vec<(usize, Vec<usize>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UmcCheck {
    pub holds: bool,
    /// Why the search failed, when it did.
    pub reason: Option<String>,
    pub groups: Vec<GroupWitness>,
    pub subsets_evaluated: u64,
}

struct Search<'a> {
    m: usize,
    r: usize,
    cols: &'a [u32],
    work: u64,
    memo: HashMap<u32, Option<Vec<(usize, u32)>>>,
}

impl Search<'_> {
    fn spend(&self) -> Result<()> {
        if self.work > SEARCH_BUDGET {
            return Err(Error::GuardExceeded(format!(
                "hypothesis search exceeded {SEARCH_BUDGET} subset evaluations"
            )));
        }
        Ok(())
    }

    /// A sub-pattern of the columns in `group` passing the test, memoized.
    fn group(&mut self, group: u32) -> Result<Option<Vec<(usize, u32)>>> {
        if let Some(hit) = self.memo.get(&group) {
            return Ok(hit.clone());
        }
        let members: Vec<usize> = rows_of(group);
        let target = self.m - self.r;
        let mut chosen = Vec::new();
        let found = if target == 0 {
            Some(Vec::new())
        } else if self.extend(&members, 0, &mut chosen, target)? {
            Some(chosen)
        } else {
            None
        };
        self.memo.insert(group, found.clone());
        Ok(found)
    }

    fn extend(
        &mut self,
        members: &[usize],
        at: usize,
        chosen: &mut Vec<(usize, u32)>,
        remaining: usize,
    ) -> Result<bool> {
        if remaining == 0 {
            return Ok(true);
        }
        if at == members.len() {
            return Ok(false);
        }
        let j = members[at];
        let omega = self.cols[j];
        let size = omega.count_ones() as usize;
        let omega_rows = rows_of(omega);
        // subsets of ω_j with r + 1 ..= r + remaining rows, largest first
        let top = size.min(self.r + remaining);
        for k in (self.r + 1..=top).rev() {
            let mut found = false;
            for_each_combination(&omega_rows, k, &mut |rows| {
                if found || self.work > SEARCH_BUDGET {
                    return;
                }
                let sub = mask_of(rows);
                let mut masks: Vec<u32> = chosen.iter().map(|&(_, c)| c).collect();
                masks.push(sub);
                if inequality_violation(&masks, self.r, &mut self.work).is_some() {
                    return;
                }
                chosen.push((j, sub));
                match self.extend(members, at + 1, chosen, remaining - (k - self.r)) {
                    Ok(true) => found = true,
                    _ => {
                        chosen.pop();
                    }
                }
            });
            self.spend()?;
            if found {
                return Ok(true);
            }
        }
        self.extend(members, at + 1, chosen, remaining)
    }

    /// Fills `blocks` with the profile `sizes`, each block passing
    /// [`Search::group`].
    fn partition(
        &mut self,
        unassigned: u32,
        sizes: &mut Vec<usize>,
        blocks: &mut Vec<(u32, Vec<(usize, u32)>)>,
    ) -> Result<bool> {
        if unassigned == 0 {
            return Ok(sizes.is_empty());
        }
        let lowest = unassigned.trailing_zeros() as usize;
        let rest = rows_of(unassigned & !(1 << lowest));
        let mut tried = Vec::new();
        for idx in 0..sizes.len() {
            let s = sizes[idx];
            if tried.contains(&s) {
                continue;
            }
            tried.push(s);
            sizes.remove(idx);
            let mut combos = Vec::new();
            for_each_combination(&rest, s - 1, &mut |c| combos.push(mask_of(c) | 1 << lowest));
            for block in combos {
                self.spend()?;
                if let Some(w) = self.group(block)? {
                    blocks.push((block, w));
                    if self.partition(unassigned & !block, sizes, blocks)? {
                        return Ok(true);
                    }
                    blocks.pop();
                }
            }
            sizes.insert(idx, s);
        }
        Ok(false)
    }
}

fn for_each_combination(items: &[usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if cur.len() == k {
            f(cur);
            return;
        }
        let need = k - cur.len();
        for i in start..=items.len().saturating_sub(need) {
            if items.len() < need {
                break;
            }
            cur.push(items[i]);
            go(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    if k <= items.len() {
        go(items, k, 0, &mut Vec::with_capacity(k), f);
    }
}

/// Size profiles of `n` split into `r` positive parts, most balanced first.
fn size_profiles(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, parts: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if n == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for s in (1..=max.min(n + 1 - parts)).rev() {
            if s * parts < n {
                break;
            }
            cur.push(s);
            go(n - s, parts - 1, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if r <= n {
        go(n, r, n, &mut Vec::new(), &mut out);
    }
    out.sort_by_key(|p| (p[0] - p[p.len() - 1], std::cmp::Reverse(p.clone())));
    out
}

/// Searches for a partition of the columns into `r` groups, each
/// containing a relaxed-SLMF sub-pattern, after checking `#ω_j ≥ r`.
pub fn check_umc_hypothesis(pattern: &ObservationPattern, r: usize) -> Result<UmcCheck> {
    check_guards(pattern, r)?;
    let n = pattern.n();
    if n > MAX_PATTERN_COLUMNS {
        return Err(Error::GuardExceeded(format!(
            "n = {n} exceeds {MAX_PATTERN_COLUMNS} columns"
        )));
    }
    let fail = |reason: String, work| UmcCheck {
        holds: false,
        reason: Some(reason),
        groups: Vec::new(),
        subsets_evaluated: work,
    };
    if let Some(j) = (0..n).find(|&j| pattern.omega(j).len() < r) {
        return Ok(fail(
            format!(
                "column {j} has {} < r observed rows",
                pattern.omega(j).len()
            ),
            0,
        ));
    }
    if n < r {
        return Ok(fail(
            format!("{n} columns cannot form {r} nonempty groups"),
            0,
        ));
    }
    if pattern.m() < r {
        return Ok(fail(format!("m = {} is below r", pattern.m()), 0));
    }
    let cols: Vec<u32> = pattern.omegas().iter().map(|w| mask_of(w)).collect();
    let mut search = Search {
        m: pattern.m(),
        r,
        cols: &cols,
        work: 0,
        memo: HashMap::new(),
    };
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    for mut sizes in size_profiles(n, r) {
        let mut blocks = Vec::new();
        if search.partition(all, &mut sizes, &mut blocks)? {
            let groups = blocks
                .into_iter()
                .map(|(block, sub)| GroupWitness {
                    columns: rows_of(block),
                    sub_pattern: sub.into_iter().map(|(j, s)| (j, rows_of(s))).collect(),
                })
                .collect();
            return Ok(UmcCheck {
                holds: true,
                reason: None,
                groups,
                subsets_evaluated: search.work,
            });
        }
    }
    Ok(fail(
        "no partition has a relaxed-SLMF in every group".into(),
        search.work,
    ))
}

/// Residuals of the power-sum system restricted to the observed entries,
/// with `values[j][ℓ−1]` for `ℓ = 1..=#ω_j`.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaResidual {
    pub values: Vec<Vec<f64>>,
    /// `#ω_j · max(1, max_{i∈ω_j} |x̃_ij|)^ℓ`, matching `values`.
    pub scales: Vec<Vec<f64>>,
}

impl OmegaResidual {
    pub fn max_scaled(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.scales)
            .flat_map(|(v, s)| v.iter().zip(s).map(|(a, b)| a.abs() / b))
            .fold(0.0, f64::max)
    }
}

pub fn omega_power_sum_residual(
    fact: &Factorization,
    x_tilde: &DenseMatrix,
    omega: &ObservationPattern,
) -> Result<OmegaResidual> {
    let z = fact.reconstruct();
    if z.shape() != x_tilde.shape() || omega.m() != z.nrows() || omega.n() != z.ncols() {
        return Err(Error::dims(format!(
            "factorization {}x{}, data {}x{}, pattern {}x{}",
            z.nrows(),
            z.ncols(),
            x_tilde.rows(),
            x_tilde.cols(),
            omega.m(),
            omega.n()
        )));
    }
    let mut values = Vec::with_capacity(omega.n());
    let mut scales = Vec::with_capacity(omega.n());
    for (j, w) in omega.omegas().iter().enumerate() {
        let zj: Vec<f64> = w.iter().map(|&i| z[(i, j)]).collect();
        let xj: Vec<f64> = w.iter().map(|&i| x_tilde[(i, j)]).collect();
        let pz = power_sums(&zj, w.len())?;
        let px = power_sums(&xj, w.len())?;
        values.push(pz.sums.iter().zip(&px.sums).map(|(a, b)| a - b).collect());
        let top = xj.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        scales.push(
            (1..=w.len())
                .map(|l| w.len() as f64 * top.powi(l as i32))
                .collect(),
        );
    }
    Ok(OmegaResidual { values, scales })
}

/// `(dim M, #equations)` for rank-`r` matrices of size `m × n`.
pub fn degrees_of_freedom(m: usize, n: usize, r: usize) -> Result<(usize, usize)> {
    if r == 0 || r >= m.min(n) {
        return Err(Error::invalid(format!(
            "need 0 < r < min(m, n), got r = {r}"
        )));
    }
    let dim = r * (m + n - r);
    debug_assert_eq!((m - r) * r + r * n, dim);
    Ok((dim, m * n))
}
