//! Seeded uniform stream used by the instance generators.
//!
//! The generator is xoshiro256** seeded through splitmix64, so any
//! implementation of those two reference algorithms reproduces the stream
//! bit for bit. Floats take the top 53 bits of each output.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::scalar::Real;

const INV_2_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Debug, Clone)]
pub struct Rand {
    inner: Xoshiro256StarStar,
}

impl Rand {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn unit_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * INV_2_53
    }

    /// Uniform on the open interval (lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit_open()
    }

    /// `Rand(n, lo, hi)`: a vector of `n` independent uniforms on (lo, hi).
    pub fn vector<T: Real>(&mut self, n: usize, lo: f64, hi: f64) -> Vec<T> {
        (0..n).map(|_| T::lit(self.uniform(lo, hi))).collect()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.unit_open() * n as f64) as usize).min(n.saturating_sub(1))
    }
}
