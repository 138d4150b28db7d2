//! Per-path random streams.
//!
//! Every Monte Carlo path owns an independent ChaCha8 stream selected by its
//! index, so results do not depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Human-readable generator description written into run metadata.
pub const RNG_DESCRIPTION: &str = "ChaCha8Rng (rand_chacha 0.9); seed_from_u64(seed), set_stream(path_index)";

pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}
