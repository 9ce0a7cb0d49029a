//! Reproducible random streams.
//!
//! Every trial owns a `Pcg64` (PCG XSL RR 128/64) generator seeded through
//! `SeedableRng::seed_from_u64`. Seeds for cells and trials are derived from a
//! parent seed with the SplitMix64 finalizer, so any trial can be replayed in
//! isolation. Sampling is done here rather than through `rand` distributions
//! so that the mapping from raw words to draws is fixed:
//!
//! * uniform integers in `[0, n)` use Lemire's multiply-and-reject method;
//! * a Bernoulli(p) draw consumes exactly one word `w` and succeeds when
//!   `w < p * 2^64` (always for `p = 1`, never for `p = 0`).

use rand_core::{RngCore, SeedableRng};
use rand_pcg::Pcg64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix_finalize(parent.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Seed of the grid cell at `(order_size, batch_size)`.
pub fn cell_seed(base_seed: u64, order_size: u64, batch_size: u64) -> u64 {
    derive_seed(derive_seed(base_seed, order_size), batch_size)
}

/// Random stream of a single trial.
#[derive(Debug, Clone)]
pub struct TrialRng {
    inner: Pcg64,
}

impl TrialRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    pub fn next_word(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut m = u128::from(self.next_word()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_word()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    pub fn bernoulli(&mut self, threshold: BernoulliThreshold) -> bool {
        let word = self.next_word();
        match threshold {
            BernoulliThreshold::Never => false,
            BernoulliThreshold::Always => true,
            BernoulliThreshold::Below(t) => word < t,
        }
    }
}

/// Precomputed acceptance threshold for Bernoulli draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BernoulliThreshold {
    Never,
    Always,
    Below(u64),
}

impl BernoulliThreshold {
    pub fn new(p: f64) -> Self {
        if p <= 0.0 {
            Self::Never
        } else if p >= 1.0 {
            Self::Always
        } else {
            // 2^64 * p is below 2^64 for p < 1; the cast saturates regardless.
            Self::Below((p * 18_446_744_073_709_551_616.0) as u64)
        }
    }
}
