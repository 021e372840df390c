//! Seeded randomness.
//!
//! Every random draw descends from one 64-bit seed through xoshiro256++
//! (256-bit state, output `rotl(s0 + s3, 23) + s0`), with the state expanded
//! from the seed by SplitMix64. Uniform doubles take the top 53 bits of one
//! output, `(x >> 11) * 2^-53`, so a port in another language reproduces the
//! same sample sets bit for bit.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Uniform draw from `[0, 1)`.
pub fn uniform(rng: &mut SeededRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_in(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// A Gaussian bump `amplitude * exp(-((t - center)/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    /// Value and first two derivatives in `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let z = (t - self.center) / self.width;
        let g = self.amplitude * (-z * z).exp();
        let d1 = -2.0 * z / self.width * g;
        let d2 = (4.0 * z * z - 2.0) / (self.width * self.width) * g;
        (g, d1, d2)
    }
}

/// Sum of 3 to 8 bumps with centers in `[lo, hi]`, widths in
/// `[min_width, max_width]` and amplitudes in `[-1, 1]`.
pub fn random_bumps(rng: &mut SeededRng, lo: f64, hi: f64, min_width: f64, max_width: f64) -> Vec<Bump> {
    let count = 3 + (rng.next_u64() % 6) as usize;
    (0..count)
        .map(|_| Bump {
            center: uniform_in(rng, lo, hi),
            width: uniform_in(rng, min_width, max_width.max(min_width)),
            amplitude: uniform_in(rng, -1.0, 1.0),
        })
        .collect()
}

/// Values of a bump sum at `nodes`.
pub fn sample_bumps(bumps: &[Bump], nodes: &[f64]) -> Vec<f64> {
    nodes.iter().map(|&t| bumps.iter().map(|b| b.eval(t).0).sum()).collect()
}
