//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 with a 64-bit seed and
//! a 64-bit stream id. Work that is split into independent units (rows of a
//! synthetic sample, trees of a forest, restarts of the power method) gives
//! each unit its own stream, keyed by the unit's index, so the output does
//! not depend on how the units are scheduled across threads.
//!
//! Distinct purposes that share a user seed are separated by mixing a purpose
//! tag into the seed with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 keyed by `seed`, positioned at the start of stream `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser over `seed ^ tag`, used to decorrelate purposes.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) mod tags {
    pub const SAMPLE: u64 = 1;
    pub const BASELINE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const POWER: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const SUBSAMPLE: u64 = 6;
    pub const STRATIFY: u64 = 7;
}
