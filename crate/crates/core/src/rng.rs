//! Seeded random stream shared by the engine and the OneMax lab.
//!
//! The stream is ChaCha8 seeded through `SeedableRng::seed_from_u64`, which
//! is specified bit-for-bit and independent of platform word size. All
//! draws go through the three methods below so the consumption order is
//! easy to audit:
//!
//! * [`RngStream::unit`]: one `u64`, top 53 bits scaled into `[0, 1)`.
//! * [`RngStream::below`]: one uniform integer in `[0, n)`.
//! * [`RngStream::coin`]: one [`RngStream::unit`] draw compared with 0.5.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`; always consumes exactly one draw.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform in `[0, n)`. Panics when `n == 0`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n as u64) as usize
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.unit() < 0.5
    }

    /// Number of failures before the first success of a Bernoulli(`p`)
    /// sequence, from a single draw.
    pub fn geometric(&mut self, p: f64) -> u64 {
        if p >= 1.0 {
            return 0;
        }
        if p <= 0.0 {
            return u64::MAX;
        }
        let u = self.unit();
        let k = ((1.0 - u).ln() / (-p).ln_1p()).floor();
        if k >= u64::MAX as f64 {
            u64::MAX
        } else {
            k as u64
        }
    }
}

/// Derives an independent child seed from a base seed and a list of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &x| splitmix64(acc ^ splitmix64(x.wrapping_add(0x632b_e59b_d9b4_e019))))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
