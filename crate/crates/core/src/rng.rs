//! Deterministic per-index random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for work item `index` under master `seed`. Streams for
/// distinct indices are independent, so work can be split across threads
/// without changing any draw.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
