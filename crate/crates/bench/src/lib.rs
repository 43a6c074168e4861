//! Seeded inputs shared by the benchmarks.

use afmseg::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform intensities in `[0, 255)`.
pub fn random_tile(rows: usize, cols: usize, seed: u64) -> Grid<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::from_fn(cols, rows, |_, _| rng.random_range(0.0..255.0))
}

/// Blobby two-phase mask: thresholded sum of a few random cosines, so domains
/// have realistic sizes rather than salt-and-pepper noise.
pub fn blob_mask(side: usize, seed: u64) -> Grid<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.02..0.12),
                rng.random_range(0.02..0.12),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Grid::from_fn(side, side, |r, c| {
        let v: f64 = waves
            .iter()
            .map(|&(fy, fx, ph)| (fy * r as f64 + fx * c as f64 + ph).cos())
            .sum();
        v > 0.0
    })
}
