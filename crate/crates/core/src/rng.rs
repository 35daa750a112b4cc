//! Reproducible random streams.
//!
//! Every stochastic component draws from a ChaCha stream addressed by a
//! `(seed, stream)` pair, so chain `c` of replication `r` can be regenerated
//! in isolation without replaying anything that came before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SamplerRng = ChaCha8Rng;

/// Independent stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SamplerRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a counter.
///
/// SplitMix64 finalizer over the pair; collisions between distinct
/// `(seed, index)` pairs are as unlikely as for any 64-bit hash.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
