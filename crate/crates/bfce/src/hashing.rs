//! Deterministic index family mapping element bytes to `k` positions in `[0, m)`.
//!
//! Indices are derived by double hashing (Kirsch & Mitzenmacher): two seeded
//! 64-bit hashes `h1, h2` of the element, with `h2` forced odd, expand into
//! `index_i = (h1 + i*h2) mod m` for `i = 0..k`.

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SEED_TWEAK: u64 = 0x9e37_79b9_7f4a_7c15;

/// A family of `k` index functions into `[0, m)`, fixed by a 64-bit seed.
///
/// Pure and stateless after construction; the same `(seed, k, m, element)`
/// always yields the same index list, on any platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashFamily {
    seed: u64,
    k: u32,
    m: u64,
}

impl HashFamily {
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self> {
        if m < 1 || k < 1 || u64::from(k) > m {
            return Err(Error::InvalidParameters(format!(
                "hash family requires 1 <= k <= m, got m = {m}, k = {k}"
            )));
        }
        Ok(Self { seed, k, m })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `k` probe positions for an element, in probe order.
    /// Duplicate positions are permitted; collisions are part of the model.
    pub fn indices(&self, element: &[u8]) -> Vec<u64> {
        let probe = self.probe(element);
        (0..self.k).map(|i| self.index_at(probe, i)).collect()
    }

    /// The two base hashes an element expands from. Computing them once lets
    /// callers run a check and a subsequent set without re-hashing.
    #[inline]
    pub(crate) fn probe(&self, element: &[u8]) -> (u64, u64) {
        let h1 = hash64(element, self.seed);
        let h2 = hash64(element, self.seed ^ SEED_TWEAK) | 1;
        (h1, h2)
    }

    #[inline]
    pub(crate) fn index_at(&self, (h1, h2): (u64, u64), i: u32) -> u64 {
        h1.wrapping_add(u64::from(i).wrapping_mul(h2)) % self.m
    }
}

/// Seeded FNV-1a over the bytes, then a splitmix64 finalizer for avalanche.
fn hash64(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    let mut z = h;
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
