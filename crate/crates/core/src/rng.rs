//! Seed plumbing.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! 64-bit seed and a stream id, so independent phases of a computation
//! (bids, noise, outcomes, splits) never share a sequence and any of them can
//! be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids used across the crate.
pub mod stream {
    pub const COVARIATES: u64 = 1;
    pub const TRUTH: u64 = 2;
    pub const BIAS: u64 = 3;
    pub const BIDS: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const OUTCOMES: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const INIT: u64 = 8;
    pub const BATCHES: u64 = 9;
    pub const FOREST: u64 = 10;
}

/// Counter-based generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a sequence of words. Unlike `std::hash`, the value is
/// fixed across toolchains and platforms.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &w| mix64(acc ^ mix64(w)))
}

/// Derives a child seed from a parent seed and a list of coordinates.
pub fn derive_seed(seed: u64, coordinates: &[u64]) -> u64 {
    let mut words = Vec::with_capacity(coordinates.len() + 1);
    words.push(seed);
    words.extend_from_slice(coordinates);
    hash_words(&words)
}
