//! Seeded sampling helpers. Every random draw in the crate goes through a
//! ChaCha stream so a seed pins results across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn uniform_vec(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, lo, hi)).collect()
}

/// Approximately Gaussian draw (sum of uniforms); adequate for test directions.
pub fn gaussian(rng: &mut SeededRng) -> f64 {
    (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0
}

pub fn gaussian_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// Uniform point in the ball of the given radius in `n` dimensions.
pub fn ball(rng: &mut SeededRng, n: usize, radius: f64) -> Vec<f64> {
    let mut v = gaussian_vec(rng, n);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    for x in &mut v {
        *x *= r / norm;
    }
    v
}
