//! Seeding.
//!
//! Every random draw goes through [`ChaCha8Rng`], a counter-based generator
//! with a published algorithm, so a `(config, seed)` pair reproduces the same
//! system on any platform. Ensemble members and recurrence samples get their
//! own stream seeded with [`derive_seed`]`(master, index)`.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of member `index` of an ensemble with master seed `master`:
/// `mix64(master + (index + 1) * GOLDEN_GAMMA)`, wrapping.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
