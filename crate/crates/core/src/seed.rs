//! Seed derivation for schedule-independent Monte Carlo work.
//!
//! Every unit of random work (an edge, a trial, an episode, a query) gets its
//! own generator seeded from a parent seed and an index path, so results do
//! not depend on which worker runs what or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all simulation randomness.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and `index`.
#[inline]
pub fn derive(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Derives a child seed from a path of indices.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |acc, &i| derive(acc, i))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

// Stream tags keep unrelated uses of the same parent seed apart.
pub(crate) const STREAM_NODES: u64 = 0x4e4f_4445;
pub(crate) const STREAM_EDGES: u64 = 0x4544_4745;
pub(crate) const STREAM_QUERY: u64 = 0x5155_4552;
pub(crate) const STREAM_EXEC: u64 = 0x4558_4543;
pub(crate) const STREAM_TRAIN: u64 = 0x5452_4149;
