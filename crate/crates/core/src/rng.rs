//! Seeded, platform-independent randomness.
//!
//! The generator is xoshiro256** (Blackman and Vigna), seeded from a `u64`
//! by expanding it with SplitMix64, as `rand_xoshiro` implements it. The
//! derived draws below use only integer arithmetic and IEEE operations, so
//! a seed reproduces the same stream on every platform:
//!
//! * uniform `[0, 1)`: top 53 bits of `next_u64` times `2^-53`;
//! * bounded integers: Lemire's multiply-and-reject method;
//! * permutations: Fisher-Yates from the last position down;
//! * normals: Box-Muller, both variates of a pair used in order;
//! * Cauchy: `tan(pi (U - 1/2))`.
//!
//! Independent streams for parallel replicates use
//! `seed = base_seed + replicate_index` (wrapping).

use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: Xoshiro256StarStar,
    spare_normal: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Stream number `index` derived from `base`.
    pub fn derive(base: u64, index: u64) -> Self {
        Self::new(base.wrapping_add(index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = self.next_u64() as u128 * bound as u128;
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn bernoulli_half(&mut self) -> f64 {
        (self.next_u64() >> 63) as f64
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn standard_cauchy(&mut self) -> f64 {
        libm::tan(core::f64::consts::PI * (self.uniform_open() - 0.5))
    }

    /// Shuffles `items` in place.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

/// Uniformly random permutation of `0..n` drawn from `state`.
pub fn random_permutation(state: &mut RngState, n: usize) -> Vec<usize> {
    state.permutation(n)
}
