//! False-positive probability models.
//!
//! Three forms of the probability that a never-inserted element passes the
//! membership test of an `(m, k)` filter holding `n` elements:
//!
//! * approximate: `(1 - e^(-kn/m))^k`, the classical large-m form;
//! * exact: `m^(-k(n+1)) * sum_{i=1..m} i^k * i! * C(m,i) * S(kn, i)`, with
//!   `S` the Stirling numbers of the second kind, evaluated in exact
//!   big-integer arithmetic (desk scale only);
//! * fill ratio: `(B/m)^k` from the observed count `B` of set bits.

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::filter::CountingBloomFilter;

/// Largest `m` accepted by [`exact_fpp`].
pub const EXACT_MAX_M: u64 = 64;
/// Largest `k * n` accepted by [`exact_fpp`].
pub const EXACT_MAX_KN: u64 = 256;

/// `(1 - e^(-kn/m))^k`.
///
/// Total for any `n`; callers are expected to uphold `1 <= k <= m`.
pub fn approx_fpp(m: u64, k: u32, n: u64) -> f64 {
    debug_assert!(m >= 1 && k >= 1 && u64::from(k) <= m);
    let x = -(k as f64) * (n as f64) / (m as f64);
    (1.0 - x.exp()).powi(k as i32)
}

/// `(B/m)^k` from a bit count `B`.
pub fn fill_ratio_fpp(m: u64, k: u32, ones: u64) -> f64 {
    debug_assert!(ones <= m);
    (ones as f64 / m as f64).powi(k as i32)
}

/// The exact false-positive probability after `n` insertions, under the
/// idealized model where each insertion throws `k` independent uniform
/// indices.
///
/// Evaluated as an exact rational and converted to binary64 at the end.
/// Limited to `m <= 64` and `k*n <= 256` so the big-integer evaluation stays
/// sub-second; beyond that the approximate form is the intended tool.
pub fn exact_fpp(m: u64, k: u32, n: u64) -> Result<f64> {
    let kn = u64::from(k).saturating_mul(n);
    if m > EXACT_MAX_M || kn > EXACT_MAX_KN {
        return Err(Error::ExactFppOutOfRange { m, kn });
    }
    if m < 1 || k < 1 || u64::from(k) > m {
        return Err(Error::InvalidParameters(format!(
            "exact_fpp requires 1 <= k <= m, got m = {m}, k = {k}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let m_us = m as usize;
    let stirling = stirling_row(kn as usize, m_us);
    let mut numer = BigUint::zero();
    let mut factorial = BigUint::one();
    for i in 1..=m_us {
        factorial *= BigUint::from(i);
        numer += BigUint::from(i).pow(k)
            * &factorial
            * binomial(BigUint::from(m_us), BigUint::from(i))
            * &stirling[i];
    }
    let denom = BigUint::from(m).pow(k * (n as u32 + 1));
    Ok(big_ratio_to_f64(&numer, &denom))
}

/// Stirling numbers of the second kind `S(n, i)` for `i = 0..=max_i`,
/// by the triangular recurrence `S(n+1, i) = i*S(n, i) + S(n, i-1)`.
///
/// The recurrence is used instead of the explicit alternating sum, which
/// cancels catastrophically in floating point; here every intermediate is an
/// exact non-negative integer.
pub(crate) fn stirling_row(n: usize, max_i: usize) -> Vec<BigUint> {
    let width = max_i + 1;
    let mut row = vec![BigUint::zero(); width];
    row[0] = BigUint::one();
    for _ in 0..n {
        let mut next = vec![BigUint::zero(); width];
        for i in 1..width {
            next[i] = BigUint::from(i) * &row[i] + &row[i - 1];
        }
        row = next;
    }
    row
}

/// Correctly-scaled binary64 value of `numer / denom` for `numer <= denom`.
///
/// Shifts the numerator so the integer quotient carries ~55 significant bits,
/// then rescales; the result is within a few ulp of the true ratio.
fn big_ratio_to_f64(numer: &BigUint, denom: &BigUint) -> f64 {
    if numer.is_zero() {
        return 0.0;
    }
    let shift = 55 + denom.bits() as i64 - numer.bits() as i64;
    let q = if shift >= 0 {
        (numer << shift as u64) / denom
    } else {
        numer / (denom << (-shift) as u64)
    };
    q.to_f64().expect("55-bit quotient fits in f64") * 2f64.powi(-shift as i32)
}

/// A selectable false-positive probability function of filling state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FppModel {
    variant: FppVariant,
    m: u64,
    k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FppVariant {
    /// `(1 - e^(-ks/m))^k` with `n = s`; the default used by the estimator.
    Approximate,
    /// The Stirling-number form with `n = s`; desk scale only.
    Exact,
    /// `(B/m)^k` from the observed fill.
    FillRatio,
}

impl FppModel {
    pub fn new(variant: FppVariant, m: u64, k: u32) -> Result<Self> {
        if m < 1 || k < 1 || u64::from(k) > m {
            return Err(Error::InvalidParameters(format!(
                "fpp model requires 1 <= k <= m, got m = {m}, k = {k}"
            )));
        }
        Ok(Self { variant, m, k })
    }

    pub fn approximate(m: u64, k: u32) -> Result<Self> {
        Self::new(FppVariant::Approximate, m, k)
    }

    pub fn variant(&self) -> FppVariant {
        self.variant
    }

    /// The model's probability for a filter in its current state.
    pub fn fpp_at_state(&self, filter: &CountingBloomFilter) -> Result<f64> {
        self.fpp_for(filter.s(), filter.ones())
    }

    pub(crate) fn fpp_for(&self, s: u64, ones: u64) -> Result<f64> {
        match self.variant {
            FppVariant::Approximate => Ok(approx_fpp(self.m, self.k, s)),
            FppVariant::Exact => exact_fpp(self.m, self.k, s),
            FppVariant::FillRatio => Ok(fill_ratio_fpp(self.m, self.k, ones)),
        }
    }
}
