//! Filter parameter selection.
//!
//! Classical sizing fixes `(m, k)` from a capacity `s_max` and a target
//! false-positive probability. The cumulative criterion instead minimizes
//! the expected total counting error built up over the whole filling,
//! `sum_{s=0..s_max} t~_s/(1 - t~_s)`, which is the quantity the corrected
//! counter actually accumulates.

use crate::error::{Error, Result};
use crate::estimator::DEGENERATE_FPP;
use crate::fpp::approx_fpp;

/// Classical sizing: `m = floor(-s_max ln(t) / ln(2)^2)`, then
/// `k = floor((m/s_max) ln 2)`, both clamped to at least 1.
///
/// Both quantities are floored, not rounded: the reference configuration
/// (s_max = 17000, t = 0.01) -> (162945, 6) is only reproduced that way
/// (the unrounded values are 162945.99 and 6.64).
pub fn classical_size(s_max: u64, target_fpp: f64) -> Result<(u64, u32)> {
    if s_max < 1 {
        return Err(Error::InvalidParameters("s_max must be >= 1".into()));
    }
    if !(target_fpp > 0.0 && target_fpp < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "target false-positive probability must lie in (0, 1), got {target_fpp}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let m = ((-(s_max as f64) * target_fpp.ln()) / (ln2 * ln2)).floor() as u64;
    let m = m.max(1);
    let k = ((m as f64 / s_max as f64) * ln2).floor() as u64;
    let k = k.clamp(1, u64::from(u32::MAX)) as u32;
    Ok((m, k))
}

/// The cumulative-counting-error objective `sum_{s=0..=s_max} t/(1-t)` with
/// `t = approx_fpp(m, k, s)`. Infinite once the model saturates (t -> 1).
pub fn cumulative_error(m: u64, k: u32, s_max: u64) -> f64 {
    let mut sum = 0.0;
    for s in 0..=s_max {
        let t = approx_fpp(m, k, s);
        sum += t / (1.0 - t);
    }
    sum
}

/// The `k` minimizing [`cumulative_error`] for a fixed `m`, scanning
/// `k = 1 ..= min(m, ceil(2 (m/s_max) ln 2) + 8)`; the window safely
/// brackets the classical optimum `(m/s_max) ln 2`. Ties break toward
/// smaller `k`.
pub fn k_opt_cumulative(m: u64, s_max: u64) -> Result<u32> {
    if m < 1 || s_max < 1 {
        return Err(Error::InvalidParameters(
            "k_opt_cumulative requires m >= 1 and s_max >= 1".into(),
        ));
    }
    let classical = 2.0 * (m as f64 / s_max as f64) * std::f64::consts::LN_2;
    let k_hi = (classical.ceil() as u64 + 8).min(m);
    let mut best_k = 1u32;
    let mut best = f64::INFINITY;
    for k in 1..=k_hi {
        let k = k as u32;
        let objective = cumulative_error(m, k, s_max);
        if objective < best {
            best = objective;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// `s_max * t/(1-t)` at `t = approx_fpp(m, k, s_max)`: an upper bound on the
/// cumulative sum, since `t_s` is nondecreasing in `s` and `t_0 = 0`.
pub fn mean_error_upper_bound(m: u64, k: u32, s_max: u64) -> Result<f64> {
    let t = approx_fpp(m, k, s_max);
    if t >= DEGENERATE_FPP {
        return Err(Error::DegenerateFpp { t, s: s_max });
    }
    Ok(s_max as f64 * t / (1.0 - t))
}

/// Smallest `m` (with `k = k_opt_cumulative(m, s_max)` at every probe) whose
/// cumulative counting error stays within `target_mean_error`.
///
/// The per-`k` objective decreases in `m` and the scan window only widens,
/// so the best-`k` objective is monotone in `m` and a doubling bracket plus
/// binary search yields the exact minimum.
pub fn size_for_error_budget(s_max: u64, target_mean_error: f64) -> Result<(u64, u32)> {
    if s_max < 1 {
        return Err(Error::InvalidParameters("s_max must be >= 1".into()));
    }
    if !(target_mean_error > 0.0 && target_mean_error.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "error budget must be positive and finite, got {target_mean_error}"
        )));
    }
    let fits = |m: u64| -> Result<bool> {
        let k = k_opt_cumulative(m, s_max)?;
        Ok(cumulative_error(m, k, s_max) <= target_mean_error)
    };
    let mut hi = 1u64;
    while !fits(hi)? {
        hi = hi.checked_mul(2).ok_or_else(|| {
            Error::InvalidParameters(format!(
                "no feasible filter size below 2^63 bits for budget {target_mean_error}"
            ))
        })?;
    }
    let mut lo = hi / 2 + 1;
    if hi == 1 {
        lo = 1;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let k = k_opt_cumulative(hi, s_max)?;
    Ok((hi, k))
}
