//! Seeded fixtures shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two overlapping classes of `n` rows in `d` dimensions, alternating labels.
pub fn two_class(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let shift = if y[i] && j < 4 { 0.8 } else { 0.0 };
        rng.random_range(-1.0..1.0) + shift
    });
    (x, y)
}

/// A `t x d` input sequence with slowly alternating labels.
pub fn sequence(t: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((t, d), |_| rng.random_range(-1.0..1.0));
    let y = (0..t).map(|i| (i / 25) % 2 == 1).collect();
    (x, y)
}
