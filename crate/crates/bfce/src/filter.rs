//! The Bloom filter bit array fused with the negative-check counter `s`.
//!
//! `s` counts exactly the insertions whose membership check was negative at
//! arrival time, so it can never exceed the number of distinct elements
//! presented. Bits only flip 0 -> 1 and `s` only grows.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::fpp;
use crate::hashing::HashFamily;

/// How the filter was filled; batch-start records the initial batch size so
/// the correction sum can start at `r = b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMode {
    OneByOne,
    BatchStart { b: u64 },
}

/// Bit array of length `m`, its hash family, the fused counter `s`, and a
/// cached population count of set bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingBloomFilter {
    family: HashFamily,
    bits: Vec<u8>,
    ones: u64,
    s: u64,
    mode: FillMode,
}

impl CountingBloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self> {
        let family = HashFamily::new(m, k, seed)?;
        Ok(Self {
            family,
            bits: vec![0u8; m.div_ceil(8) as usize],
            ones: 0,
            s: 0,
            mode: FillMode::OneByOne,
        })
    }

    pub fn m(&self) -> u64 {
        self.family.m()
    }

    pub fn k(&self) -> u32 {
        self.family.k()
    }

    pub fn seed(&self) -> u64 {
        self.family.seed()
    }

    /// The negative-check counter.
    pub fn s(&self) -> u64 {
        self.s
    }

    /// The number of bits currently set.
    pub fn ones(&self) -> u64 {
        self.ones
    }

    pub fn mode(&self) -> FillMode {
        self.mode
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    /// The bit at `index`; useful for recounts and diagnostics.
    pub fn bit(&self, index: u64) -> bool {
        debug_assert!(index < self.m());
        self.bits[(index / 8) as usize] & (1 << (index % 8)) != 0
    }

    /// True iff all `k` indexed bits are set. Never mutates.
    pub fn check(&self, element: &[u8]) -> bool {
        let probe = self.family.probe(element);
        self.check_probe(probe)
    }

    /// Check-then-set: if the check is negative, set all `k` bits and count
    /// the insertion, returning true. A positive check mutates nothing.
    pub fn insert_counting(&mut self, element: &[u8]) -> bool {
        let probe = self.family.probe(element);
        if self.check_probe(probe) {
            return false;
        }
        self.set_probe(probe);
        true
    }

    /// Set the element's bits without touching the counter. Diagnostic and
    /// test hook; production filling goes through [`Self::insert_counting`].
    pub fn insert_uncounted(&mut self, element: &[u8]) {
        let probe = self.family.probe(element);
        for i in 0..self.k() {
            self.set_bit(self.family.index_at(probe, i));
        }
    }

    /// Fill an empty filter with every distinct element of `elements` at
    /// once, setting `s` to the distinct count `b`. Because the filter was
    /// empty, this step can produce no false positives and therefore no
    /// counting error. Deduplication is exact, by byte equality.
    pub fn insert_batch_initial<I, T>(&mut self, elements: I) -> Result<u64>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        if self.s != 0 || self.ones != 0 {
            return Err(Error::FilterNotEmpty {
                s: self.s,
                ones: self.ones,
            });
        }
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        let mut b = 0u64;
        for element in elements {
            let bytes = element.as_ref();
            if seen.insert(bytes.to_vec()) {
                self.insert_uncounted(bytes);
                b += 1;
            }
        }
        self.s = b;
        self.mode = FillMode::BatchStart { b };
        Ok(b)
    }

    /// `(B/m)^k` from the current fill.
    pub fn fill_ratio_fpp(&self) -> f64 {
        fpp::fill_ratio_fpp(self.m(), self.k(), self.ones)
    }

    #[inline]
    pub(crate) fn probe(&self, element: &[u8]) -> (u64, u64) {
        self.family.probe(element)
    }

    #[inline]
    pub(crate) fn check_probe(&self, probe: (u64, u64)) -> bool {
        (0..self.k()).all(|i| {
            let idx = self.family.index_at(probe, i);
            self.bits[(idx / 8) as usize] & (1 << (idx % 8)) != 0
        })
    }

    /// Set all `k` bits of a probe and increment the counter.
    #[inline]
    pub(crate) fn set_probe(&mut self, probe: (u64, u64)) {
        for i in 0..self.k() {
            self.set_bit(self.family.index_at(probe, i));
        }
        self.s += 1;
    }

    #[inline]
    fn set_bit(&mut self, index: u64) {
        let byte = (index / 8) as usize;
        let mask = 1u8 << (index % 8);
        if self.bits[byte] & mask == 0 {
            self.bits[byte] |= mask;
            self.ones += 1;
        }
    }

    pub(crate) fn packed_bits(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn from_parts(
        family: HashFamily,
        bits: Vec<u8>,
        s: u64,
        mode: FillMode,
    ) -> Self {
        let ones = bits.iter().map(|b| u64::from(b.count_ones())).sum();
        Self {
            family,
            bits,
            ones,
            s,
            mode,
        }
    }
}
