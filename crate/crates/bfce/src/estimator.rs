//! Cardinality estimators: the corrected counter `N_s = s + S_s` with its
//! in-stream mean/variance accumulation, and the two fill-ratio baselines
//! from the literature (Swamidass & Baldi; Papapetrou, Siberski & Nejdl).
//!
//! Each time the fused counter increments from state `r`, a never-inserted
//! element has just been accepted after `X_r` false positives were silently
//! swallowed; `X_r` is geometric-tailed with `P(X_r = x) = (1 - t_r) t_r^x`.
//! Summing the per-state means `t_r/(1-t_r)` and variances `t_r/(1-t_r)^2`
//! over the filling history yields `E(S_s)` and `V(S_s)`, so the corrected
//! estimate is `s + E(S_s)` with standard deviation `sqrt(V(S_s))`. The same
//! formulas hold whether or not the stream repeats elements, since true
//! positives are never counted.

use crate::error::{Error, Result};
use crate::filter::{CountingBloomFilter, FillMode};
use crate::fpp::{approx_fpp, FppModel, FppVariant};
use crate::hashing::HashFamily;

/// Rejection threshold for the per-increment false-positive probability.
/// At `t >= 1 - 2^-40` the filter is saturated beyond the model's validity
/// and the correction terms would blow up toward infinity.
pub const DEGENERATE_FPP: f64 = 1.0 - 1.0 / ((1u64 << 40) as f64);

/// Running sums for `E(S_s)` and `V(S_s)`, advanced at each counter
/// increment. `start` is 1 for one-by-one filling and `b` for batch-start
/// filling: transitions below `start` contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionAccumulator {
    sum_mean: f64,
    sum_var: f64,
    start: u64,
    model: FppModel,
}

impl CorrectionAccumulator {
    /// A fresh accumulator for one-by-one filling (`start = 1`).
    pub fn new(model: FppModel) -> Self {
        Self {
            sum_mean: 0.0,
            sum_var: 0.0,
            start: 1,
            model,
        }
    }

    pub fn sum_mean(&self) -> f64 {
        self.sum_mean
    }

    pub fn sum_var(&self) -> f64 {
        self.sum_var
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn model(&self) -> FppModel {
        self.model
    }

    /// Record a counter increment. `filter` must be in its pre-increment
    /// state: its counter value is the transition index `r` and its bit
    /// array is the one the swallowed false positives were checked against.
    ///
    /// No state changes when an error is returned.
    pub fn on_counter_increment(&mut self, filter: &CountingBloomFilter) -> Result<()> {
        let s_before = filter.s();
        if s_before < self.start {
            return Ok(());
        }
        let t = self.model.fpp_for(s_before, filter.ones())?;
        if t >= DEGENERATE_FPP {
            return Err(Error::DegenerateFpp { t, s: s_before });
        }
        let mean_term = t / (1.0 - t);
        self.sum_mean += mean_term;
        self.sum_var += mean_term / (1.0 - t);
        Ok(())
    }

    pub(crate) fn set_start(&mut self, start: u64) {
        debug_assert_eq!(self.sum_mean, 0.0);
        self.start = start;
    }

    pub(crate) fn from_parts(model: FppModel, start: u64, sum_mean: f64, sum_var: f64) -> Self {
        Self {
            sum_mean,
            sum_var,
            start,
            model,
        }
    }
}

/// A point estimate of the true distinct count, with a standard deviation
/// when the method provides one (the baselines do not).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardinalityEstimate {
    pub mean: f64,
    pub std_dev: Option<f64>,
    pub counter: u64,
    pub method: EstimateMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Corrected,
    Swamidass,
    Papapetrou,
}

/// `-(m/k) ln(1 - B/m)`: the Swamidass & Baldi fill-ratio estimator.
pub fn estimate_swamidass(m: u64, k: u32, ones: u64) -> Result<f64> {
    validate_fill(m, k, ones)?;
    if ones == m {
        return Err(Error::SaturatedFilter { m });
    }
    Ok(-(m as f64 / f64::from(k)) * (1.0 - ones as f64 / m as f64).ln())
}

/// `ln(1 - B/m) / (k ln(1 - 1/m))`: the Papapetrou et al. maximum-likelihood
/// estimator. Requires `m >= 2`; agrees with Swamidass to `O(1/m)` relative.
pub fn estimate_papapetrou(m: u64, k: u32, ones: u64) -> Result<f64> {
    validate_fill(m, k, ones)?;
    if m < 2 {
        return Err(Error::InvalidParameters(
            "papapetrou estimator requires m >= 2".into(),
        ));
    }
    if ones == m {
        return Err(Error::SaturatedFilter { m });
    }
    let b = ones as f64 / m as f64;
    Ok((1.0 - b).ln() / (f64::from(k) * (1.0 - 1.0 / m as f64).ln()))
}

fn validate_fill(m: u64, k: u32, ones: u64) -> Result<()> {
    if m < 1 || k < 1 || u64::from(k) > m {
        return Err(Error::InvalidParameters(format!(
            "estimator requires 1 <= k <= m, got m = {m}, k = {k}"
        )));
    }
    if ones > m {
        return Err(Error::InvalidParameters(format!(
            "bit count {ones} exceeds filter size {m}"
        )));
    }
    Ok(())
}

/// `P(X_s = r) = (1 - t) t^r`: the law of the number of false positives
/// swallowed between two counter increments at false-positive probability t.
pub fn error_distribution_pmf(t: f64, r: u64) -> f64 {
    debug_assert!((0.0..1.0).contains(&t));
    (1.0 - t) * t.powf(r as f64)
}

/// Analytic `(E(S_s), V(S_s))` for approximate-model one-by-one or
/// batch-start filling: sums of `t_r/(1-t_r)` and `t_r/(1-t_r)^2` over the
/// transitions `r = start .. s-1`.
pub fn predicted_correction(m: u64, k: u32, start: u64, s: u64) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for r in start..s {
        let t = approx_fpp(m, k, r);
        let mean_term = t / (1.0 - t);
        mean += mean_term;
        var += mean_term / (1.0 - t);
    }
    (mean, var)
}

/// A Bloom filter fused with its correction accumulator: the complete
/// streaming estimator. Insertions keep the two in lockstep; estimates and
/// serialization read both.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedCounter {
    filter: CountingBloomFilter,
    acc: CorrectionAccumulator,
}

const MAGIC: &[u8; 4] = b"BFCE";
const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 59;

impl CorrectedCounter {
    /// A fresh counter with the default approximate-by-counter model.
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self> {
        Self::with_model(m, k, seed, FppVariant::Approximate)
    }

    pub fn with_model(m: u64, k: u32, seed: u64, variant: FppVariant) -> Result<Self> {
        let filter = CountingBloomFilter::new(m, k, seed)?;
        let acc = CorrectionAccumulator::new(FppModel::new(variant, m, k)?);
        Ok(Self { filter, acc })
    }

    pub fn filter(&self) -> &CountingBloomFilter {
        &self.filter
    }

    pub fn accumulator(&self) -> &CorrectionAccumulator {
        &self.acc
    }

    pub fn s(&self) -> u64 {
        self.filter.s()
    }

    pub fn ones(&self) -> u64 {
        self.filter.ones()
    }

    /// Stream one element: check-then-set plus correction bookkeeping.
    /// Returns true iff the counter incremented. On a degenerate-fpp error
    /// neither the filter nor the accumulator changes.
    pub fn insert(&mut self, element: &[u8]) -> Result<bool> {
        let probe = self.filter.probe(element);
        if self.filter.check_probe(probe) {
            return Ok(false);
        }
        self.acc.on_counter_increment(&self.filter)?;
        self.filter.set_probe(probe);
        Ok(true)
    }

    /// Batch-start filling: insert all distinct `elements` into the empty
    /// filter at once and start the correction sum at `r = b`.
    pub fn start_batch<I, T>(&mut self, elements: I) -> Result<u64>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let b = self.filter.insert_batch_initial(elements)?;
        self.acc.set_start(b);
        Ok(b)
    }

    /// `s + E(S_s)` with standard deviation `sqrt(V(S_s))`.
    pub fn estimate(&self) -> CardinalityEstimate {
        CardinalityEstimate {
            mean: self.filter.s() as f64 + self.acc.sum_mean(),
            std_dev: Some(self.acc.sum_var().sqrt()),
            counter: self.filter.s(),
            method: EstimateMethod::Corrected,
        }
    }

    pub fn swamidass(&self) -> Result<f64> {
        estimate_swamidass(self.filter.m(), self.filter.k(), self.filter.ones())
    }

    pub fn papapetrou(&self) -> Result<f64> {
        estimate_papapetrou(self.filter.m(), self.filter.k(), self.filter.ones())
    }

    /// Bit-exact serialization: magic "BFCE", version 1 (u16 LE), m (u64),
    /// k (u32), seed (u64), mode byte (0 one-by-one, 1 batch-start), b
    /// (u64, 0 in mode 0), s (u64), the two correction accumulators
    /// (binary64 LE), then ceil(m/8) bytes of packed bits, bit `j` stored at
    /// byte `j/8`, position `j mod 8`.
    ///
    /// The format carries no model tag; only the default approximate model
    /// round-trips, and other variants are refused rather than re-tagged.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.acc.model().variant() != FppVariant::Approximate {
            return Err(Error::ModelNotSerializable);
        }
        let bits = self.filter.packed_bits();
        let mut out = Vec::with_capacity(HEADER_LEN + bits.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.filter.m().to_le_bytes());
        out.extend_from_slice(&self.filter.k().to_le_bytes());
        out.extend_from_slice(&self.filter.seed().to_le_bytes());
        let (mode, b) = match self.filter.mode() {
            FillMode::OneByOne => (0u8, 0u64),
            FillMode::BatchStart { b } => (1u8, b),
        };
        out.push(mode);
        out.extend_from_slice(&b.to_le_bytes());
        out.extend_from_slice(&self.filter.s().to_le_bytes());
        out.extend_from_slice(&self.acc.sum_mean().to_le_bytes());
        out.extend_from_slice(&self.acc.sum_var().to_le_bytes());
        out.extend_from_slice(bits);
        Ok(out)
    }

    /// Strict decode of [`Self::to_bytes`] output; any structural
    /// inconsistency (truncation, bad magic/version, stray padding bits,
    /// impossible field combinations) is malformed-input.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let malformed = |why: &str| Error::MalformedInput(why.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(malformed("truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(malformed("bad magic"));
        }
        let u16le = |at: usize| u16::from_le_bytes(bytes[at..at + 2].try_into().unwrap());
        let u32le = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64le = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let f64le = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        if u16le(4) != FORMAT_VERSION {
            return Err(malformed("unsupported format version"));
        }
        let m = u64le(6);
        let k = u32le(14);
        let seed = u64le(18);
        let mode_byte = bytes[26];
        let b = u64le(27);
        let s = u64le(35);
        let sum_mean = f64le(43);
        let sum_var = f64le(51);

        let family = HashFamily::new(m, k, seed)
            .map_err(|_| malformed("inconsistent filter parameters"))?;
        let mode = match mode_byte {
            0 if b == 0 => FillMode::OneByOne,
            0 => return Err(malformed("one-by-one mode with nonzero batch size")),
            1 => FillMode::BatchStart { b },
            _ => return Err(malformed("unknown fill mode")),
        };
        if let FillMode::BatchStart { b } = mode {
            if s < b {
                return Err(malformed("counter below batch size"));
            }
        }
        if !(sum_mean.is_finite() && sum_var.is_finite())
            || sum_mean < 0.0
            || sum_var < sum_mean
        {
            return Err(malformed("impossible accumulator values"));
        }
        let bit_bytes = m.div_ceil(8) as usize;
        if bytes.len() != HEADER_LEN + bit_bytes {
            return Err(malformed("bit array length mismatch"));
        }
        let bits = bytes[HEADER_LEN..].to_vec();
        let padding = bit_bytes as u64 * 8 - m;
        if padding > 0 {
            let last = bits[bit_bytes - 1];
            if last >> (8 - padding) != 0 {
                return Err(malformed("nonzero padding bits"));
            }
        }
        let filter = CountingBloomFilter::from_parts(family, bits, s, mode);
        let start = match mode {
            FillMode::OneByOne => 1,
            FillMode::BatchStart { b } => b,
        };
        let model = FppModel::approximate(m, k).expect("validated above");
        let acc = CorrectionAccumulator::from_parts(model, start, sum_mean, sum_var);
        Ok(Self { filter, acc })
    }
}
