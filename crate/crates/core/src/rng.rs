//! Seeded 64-bit linear congruential generator.
//!
//! `state ← state·6364136223846793005 + 1442695040888963407 (mod 2^64)`; a
//! uniform draw in `[0, 1)` takes the top 53 bits of the new state. The
//! sequence is fixed so experiment inputs can be reproduced from the seed
//! alone in any language.

use num_complex::Complex64;

pub const MULTIPLIER: u64 = 6364136223846793005;
pub const INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform (area measure) in the disk `|z| ≤ radius`.
    pub fn in_disk(&mut self, radius: f64) -> Complex64 {
        let r = radius * self.uniform().sqrt();
        let t = self.range(0.0, 2.0 * std::f64::consts::PI);
        Complex64::from_polar(r, t)
    }
}
