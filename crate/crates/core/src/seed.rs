//! Deterministic seed derivation.
//!
//! Every random stream in the crate (node placement, head election, noise,
//! measurement matrices) is a `ChaCha8Rng` seeded from a 64-bit value derived
//! here, so any participant can regenerate any other participant's stream
//! from shared metadata.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a single seed.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags keep unrelated consumers of the same base seed apart.
pub(crate) const TAG_PLACEMENT: u64 = 0x706c_6163;
pub(crate) const TAG_ELECTION: u64 = 0x656c_6563;
pub(crate) const TAG_NOISE: u64 = 0x6e6f_6973;
pub(crate) const TAG_MEASURE: u64 = 0x6d65_6173;
