//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded by `derive_seed(seed, index)`, so any single gate or task can be
//! regenerated without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(seed) ^ splitmix64(index + 1))`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(1)))
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

/// Domain tags keep streams for different purposes apart under one seed.
pub mod domain {
    pub const GATES: u64 = 0x6761_7465;
    pub const MEASURE: u64 = 0x6d65_6173;
    pub const TASK: u64 = 0x7461_736b;
}

pub fn tagged(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    stream(derive_seed(seed, tag), index)
}
