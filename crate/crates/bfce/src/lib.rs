//! Bloom-filter cardinality estimation with an in-stream counting
//! correction.
//!
//! A Bloom filter that checks membership before every insertion can count
//! distinct elements by incrementing a counter `s` on each negative check.
//! False positives silently swallow new elements, so `s` undercounts the
//! true distinct count `n_s`. This crate models the shortfall `S_s = n_s -
//! s` as a sum of independent geometric-tail variables — one per counter
//! state, with success probability given by a false-positive model — and
//! maintains its mean and variance *while streaming*, at two extra floats
//! of state:
//!
//! ```
//! use bfce::CorrectedCounter;
//!
//! let mut counter = CorrectedCounter::new(162_945, 6, 7)?;
//! for id in 0u64..5_000 {
//!     counter.insert(&id.to_le_bytes())?;
//! }
//! let estimate = counter.estimate();
//! assert_eq!(counter.s(), 5_000);
//! assert!(estimate.mean >= 5_000.0);
//! assert!(estimate.std_dev.unwrap() < 1.0);
//! # Ok::<(), bfce::Error>(())
//! ```
//!
//! The correction is unbiased while the filter operates below its design
//! false-positive rate and degrades gracefully past it; the fill-ratio
//! baselines of Swamidass & Baldi and Papapetrou et al. are included for
//! comparison, and [`sim`] reproduces the accuracy experiments behind the
//! model.
//!
//! Modules:
//! - [`filter`]: the bit array with check-then-set insertion and the fused
//!   counter.
//! - [`fpp`]: false-positive models — the classical exponential
//!   approximation, the exact Stirling-number form, and the observed fill
//!   ratio.
//! - [`estimator`]: the correction accumulator, the corrected counter with
//!   serialization, and the baseline estimators.
//! - [`sizing`]: parameter selection for a target false-positive rate or a
//!   target cumulative counting error.
//! - [`sim`]: Monte-Carlo harness with exact ground truth and CSV/JSON
//!   reporting.

pub mod error;
pub mod estimator;
pub mod filter;
pub mod fpp;
pub mod hashing;
pub mod sim;
pub mod sizing;

pub use error::{Error, Result};
pub use estimator::{
    CardinalityEstimate, CorrectedCounter, CorrectionAccumulator, EstimateMethod,
};
pub use filter::{CountingBloomFilter, FillMode};
pub use fpp::{FppModel, FppVariant};
pub use hashing::HashFamily;
pub use sim::UniverseSpec;
