//! Seeded random streams.
//!
//! The generator is xoshiro256++ seeded through SplitMix64, so a stream is
//! fully determined by its 64-bit seed on every platform. Derived values use
//! these fixed rules:
//!
//! * uniform: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`
//! * integer below `n`: high 64 bits of `next_u64 * n`
//! * normal: Box-Muller on `u1 = 1 - uniform`, `u2 = uniform`; the cosine
//!   output is returned first and the sine output is kept for the next call
//! * Poisson: multiplication (Knuth) for means below 30, Hörmann's PTRS
//!   transformed rejection at and above 30. Both are exact samplers.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

/// Serializable snapshot of a [`SeededRng`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RngState {
    pub words: [u8; 32],
    pub spare_normal: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent sub-stream `stream` of `seed`, for work that must not
    /// depend on how many values another stream consumed.
    pub fn derive(seed: u64, stream: u64) -> Self {
        SeededRng::new(splitmix64(seed ^ splitmix64(stream.wrapping_add(1))))
    }

    pub fn state(&self) -> RngState {
        RngState {
            words: self.inner.state(),
            spare_normal: self.spare_normal,
        }
    }

    pub fn from_state(state: RngState) -> Self {
        SeededRng {
            inner: Xoshiro256PlusPlus::from_seed(state.words),
            spare_normal: state.spare_normal,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * theta.sin());
        radius * theta.cos()
    }

    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::Parameter(format!(
                "Poisson mean must be finite and >= 0, got {mean}"
            )));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        Ok(if mean < POISSON_INVERSION_LIMIT {
            self.poisson_multiplication(mean)
        } else {
            self.poisson_ptrs(mean)
        })
    }

    fn poisson_multiplication(&mut self, mean: f64) -> u64 {
        let limit = (-mean).exp();
        let mut k = 0;
        let mut product = self.uniform();
        while product > limit {
            k += 1;
            product *= self.uniform();
        }
        k
    }

    // W. Hörmann, "The transformed rejection method for generating Poisson
    // random variables", Insurance: Mathematics and Economics 12 (1993).
    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let sqrt_mean = mean.sqrt();
        let log_mean = mean.ln();
        let b = 0.931 + 2.53 * sqrt_mean;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -mean + k * log_mean - libm::lgamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }

    /// Fisher-Yates shuffle, walking indices from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
