//! Child random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream whose seed is
//! derived from a parent seed and a path of labels, so adding or removing
//! one consumer never shifts another consumer's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose labels mixed into derived seeds.
pub mod purpose {
    pub const SCENARIO: u64 = 0x5343_454e;
    pub const RUN: u64 = 0x5255_4e00;
    pub const AGENT: u64 = 0x4147_4e54;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and an ordered list of labels.
pub fn child_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_stream(parent: u64, path: &[u64]) -> Stream {
    stream(child_seed(parent, path))
}
