//! The seeded generator shared by clustering and synthetic-image generation.
//!
//! ChaCha8 produces the same stream on every platform for a given seed, which
//! keeps k-means initialisation and synthetic textures reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
