//! Deterministic point sampling for spot checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5eed_f5f5;

/// `count` points uniform in `center + [-h, h]^n`.
pub fn box_points(center: &[f64], h: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| center.iter().map(|c| c + rng.random_range(-h..=h)).collect())
        .collect()
}

/// Tensor grid with `per_axis` points per coordinate on `[-h, h]^n`.
pub fn grid_points(n: usize, h: f64, per_axis: usize) -> Vec<Vec<f64>> {
    assert!(per_axis >= 2);
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| -h + 2.0 * h * i as f64 / (per_axis - 1) as f64)
        .collect();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let v = axis[code % per_axis];
                    code /= per_axis;
                    v
                })
                .collect()
        })
        .collect()
}
