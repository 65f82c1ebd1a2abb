//! SplitMix64 generator and stream-seed derivation.
//!
//! Every random decision in a run is drawn from a [`SplitMix64`] stream whose
//! seed comes from [`derive_stream_seed`] with a fixed stream index (see
//! [`streams`]). The generator is small enough to re-implement bit-exactly in
//! any language, which is what makes traces comparable across ports.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Iterates the SplitMix64 transition `stream_index + 1` times starting from
/// `master_seed` and returns the last output.
pub fn derive_stream_seed(master_seed: u64, stream_index: u64) -> u64 {
    let mut rng = SplitMix64::new(master_seed);
    let mut out = rng.next_u64();
    for _ in 0..stream_index {
        out = rng.next_u64();
    }
    out
}

/// Stream indices, in creation order.
pub mod streams {
    pub const SCENARIO: u64 = 0;
    pub const NETWORK: u64 = 1;
    pub const REQUESTS: u64 = 2;
    pub const DEPLOYMENT: u64 = 3;
    pub const MIGRATION: u64 = 4;
    pub const SPECIES_AREA: u64 = 5;
    /// Population for request `i` (1-based) uses `POPULATION_BASE + i`.
    pub const POPULATION_BASE: u64 = 16;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn for_stream(master_seed: u64, stream_index: u64) -> Self {
        Self::new(derive_stream_seed(master_seed, stream_index))
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Rejection sampling keeps it unbiased.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    #[inline]
    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    /// `true` with probability `p`; `p <= 0` never fires, `p >= 1` always does.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order (partial Fisher-Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}
