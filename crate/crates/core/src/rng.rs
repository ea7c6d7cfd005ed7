//! Seeded Gaussian noise. Each `(seed, stream)` pair is an independent ChaCha20 keystream,
//! and standard normals come from the inverse CDF of 53-bit uniforms, one per draw.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::function::erf::erfc_inv;

use crate::domain::Vector;

#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha20Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self::for_stream(seed, 0)
    }

    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * self.uniform())
    }

    pub fn standard_normal_vector(&mut self, d: usize) -> Vector {
        Vector::from_fn(d, |_, _| self.standard_normal())
    }

    /// `N(0, σ² I_d)`; always consumes exactly `d` normals, even when `σ = 0`.
    pub fn gaussian(&mut self, d: usize, sigma: f64) -> Vector {
        self.standard_normal_vector(d) * sigma
    }

    /// Uniform point in the centered ball of the given radius.
    pub fn in_ball(&mut self, d: usize, radius: f64) -> Vector {
        let dir = self.standard_normal_vector(d);
        let r = radius * self.uniform().powf(1.0 / d as f64);
        let n = dir.norm();
        if n == 0.0 {
            Vector::zeros(d)
        } else {
            dir * (r / n)
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_range(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as u64;
        lo + (self.rng.next_u64() % span) as usize
    }
}
