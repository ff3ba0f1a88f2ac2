//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from a [`RandomStream`]; the
//! same seed always yields the same sequence of draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible stream of random draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for the `index`-th concurrent consumer of `base`.
    pub fn derived(base: u64, index: u64) -> Self {
        Self::new(derive_seed(base, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform on the half-open interval (0, 1].
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.rng.gen::<f64>()
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Exponential draw with the given rate, by inverse CDF.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open0().ln() / rate
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Inverse-CDF draw from nonnegative `weights` (need not be normalized).
    ///
    /// Returns `None` when every weight is zero.
    pub fn categorical(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for (idx, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last_positive = Some(idx);
            if target < acc {
                return Some(idx);
            }
        }
        // round-off can leave target just above the accumulated total
        last_positive
    }

    /// `k` distinct indices drawn uniformly from `0..n`, in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} distinct values from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for slot in 0..k {
            let pick = slot + self.index(n - slot);
            pool.swap(slot, pick);
        }
        pool.truncate(k);
        pool
    }
}

/// Seed of the `index`-th derived stream.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Mixes `tag` into `base` with the SplitMix64 finalizer, so that seeds
/// derived along different paths do not collide.
pub fn mix_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Searches a cumulative distribution for the first bucket whose upper edge
/// exceeds `target`. `cdf` must be nondecreasing.
#[inline]
pub fn search_cdf(cdf: &[f64], target: f64) -> usize {
    let idx = cdf.partition_point(|&edge| edge <= target);
    idx.min(cdf.len().saturating_sub(1))
}
