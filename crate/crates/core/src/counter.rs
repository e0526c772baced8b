//! Counter-based randomness.
//!
//! Every random quantity in the crate is a pure function of a 64-bit key.
//! Keys are derived by hashing, never by advancing a shared generator, so
//! results do not depend on traversal order or on how work is split across
//! threads.
//!
//! The mixing function is the SplitMix64 output function applied to
//! `x + 0x9E37_79B9_7F4A_7C15`:
//!
//! ```text
//! z = x + 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! (all arithmetic wrapping mod 2^64). Uniforms take the top 52 bits of a
//! mixed word and return `(bits + 0.5) / 2^52`, which lies strictly inside
//! `(0, 1)` and is exactly representable.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 mixing of a single word.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a key with a counter: `mix64(key ^ mix64(counter))`.
#[inline]
pub fn derive(key: u64, counter: u64) -> u64 {
    mix64(key ^ mix64(counter))
}

/// Maps a word to a uniform in the open interval `(0, 1)`.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Seed of trial `trial` at problem size `n`: `derive(derive(base, n), trial)`.
pub fn trial_seed(base_seed: u64, n: u64, trial: u64) -> u64 {
    derive(derive(base_seed, n), trial)
}
