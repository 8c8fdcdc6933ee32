//! Herfindahl-Hirschman concentration and the modified inverse HH index.
//!
//! For shares `l_k` (non-negative, summing to one) the HH index is
//! `H = sum l_k^2`. Its generalization `Hbar_n = sum l_k^n` gives the modified
//! inverse HH index of order `n`, `M_n = Hbar_{n-1} / Hbar_n`, which for large
//! `n` approaches the effective number of significant shares: `m` equal shares
//! plus one partial share `r` gives `M_n -> m + r`. `M_2` is the classical
//! inverse HH index `1 / H`.

use crate::error::{Error, Result};

/// Order used for the modified inverse HH index unless configured otherwise.
pub const DEFAULT_ORDER: u32 = 20;

/// Relative tolerance on the sum of shares.
const SUM_TOLERANCE: f64 = 1e-9;

/// Shares smaller than this fraction of the largest share are dropped from the power sums.
const NEGLIGIBLE_RATIO: f64 = 1e-300;

/// Non-negative shares summing to one. The empty list stands for "no flow".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShareList(Vec<f64>);

impl ShareList {
    /// Wraps already-normalized shares, checking the invariants.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if let Some(bad) = shares.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::domain(format!("share {bad} is not a finite non-negative number")));
        }
        if !shares.is_empty() {
            let total: f64 = shares.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::domain(format!("shares sum to {total}, expected 1")));
            }
        }
        Ok(ShareList(shares))
    }

    pub fn empty() -> Self {
        ShareList(Vec::new())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn max_share(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Divides each raw entry by the total.
///
/// Empty input gives the empty share list. Negative, non-finite or all-zero
/// input is rejected.
pub fn normalize(raw: &[f64]) -> Result<ShareList> {
    if raw.is_empty() {
        return Ok(ShareList::empty());
    }
    if let Some(bad) = raw.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::domain(format!("raw value {bad} is negative or not finite")));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("all raw values are zero"));
    }
    Ok(ShareList(raw.iter().map(|v| v / total).collect()))
}

/// Same as [`normalize`] for integer amounts; the total is accumulated exactly.
pub fn normalize_amounts(raw: &[u128]) -> Result<ShareList> {
    if raw.is_empty() {
        return Ok(ShareList::empty());
    }
    let total: u128 = raw.iter().sum();
    if total == 0 {
        return Err(Error::domain("all raw values are zero"));
    }
    let total = total as f64;
    Ok(ShareList(raw.iter().map(|&v| v as f64 / total).collect()))
}

/// `m` shares of `1/(m+r)` plus one share `r/(m+r)`.
///
/// Interpolates between `m` (at `r = 0`) and `m + 1` (at `r = 1`) equally
/// significant entries; the ideal effective count is `m + r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkShares {
    pub m: u32,
    pub r: f64,
}

impl BenchmarkShares {
    pub fn new(m: u32, r: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("benchmark share list needs m >= 1"));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::domain(format!("benchmark fraction r = {r} outside [0, 1]")));
        }
        Ok(BenchmarkShares { m, r })
    }

    pub fn effective_count(&self) -> f64 {
        self.m as f64 + self.r
    }

    pub fn shares(&self) -> ShareList {
        let x = self.effective_count();
        let mut shares = vec![1.0 / x; self.m as usize];
        shares.push(self.r / x);
        ShareList(shares)
    }
}

/// `H = sum l_k^2`.
pub fn hh_index(shares: &ShareList) -> Result<f64> {
    if shares.is_empty() {
        return Err(Error::domain("HH index of an empty share list"));
    }
    Ok(shares.0.iter().map(|s| s * s).sum())
}

/// `Hbar_n = sum l_k^n`. `Hbar_1` is 1 by normalization.
pub fn modified_hh(shares: &ShareList, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("modified HH index needs order n >= 1"));
    }
    if shares.is_empty() {
        return Err(Error::domain("modified HH index of an empty share list"));
    }
    if n == 1 {
        return Ok(1.0);
    }
    Ok(shares.0.iter().map(|s| s.powi(n as i32)).sum())
}

/// `M_n = Hbar_{n-1} / Hbar_n`, with `M_n(empty) = 0`.
///
/// Evaluated on shares rescaled by the largest share,
/// `M_n = (1 / l_max) * sum p^{n-1} / sum p^n` with `p = l / l_max`, so the
/// denominator is at least 1 however small the other shares are.
pub fn modified_inverse_hh(shares: &ShareList, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("modified inverse HH index needs order n >= 2"));
    }
    if shares.is_empty() {
        return Ok(0.0);
    }
    let max = shares.max_share();
    if max <= 0.0 {
        return Err(Error::domain("share list has no positive share"));
    }
    let (mut lower, mut upper) = (0.0_f64, 0.0_f64);
    for &s in &shares.0 {
        let p = s / max;
        if p < NEGLIGIBLE_RATIO {
            continue;
        }
        let p_lower = p.powi(n as i32 - 1);
        lower += p_lower;
        upper += p_lower * p;
    }
    Ok(lower / upper / max)
}

/// `1 / H`, the classical inverse HH index.
pub fn inverse_hh(shares: &ShareList) -> Result<f64> {
    Ok(1.0 / hh_index(shares)?)
}
