//! Seeded randomness.
//!
//! All sampling goes through ChaCha20 seeded with `seed_from_u64`, whose
//! output stream is fixed by the algorithm and identical on every platform.
//! Independent sub-streams (sweep rows, trees of a forest) are keyed by
//! mixing the parent seed with an index through SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index))
}
