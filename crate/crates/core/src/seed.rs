//! Stable 64-bit seed derivation.
//!
//! Seeds must not depend on the platform or on `std`'s randomized hashers,
//! so every derivation goes through the SplitMix64 finalizer.

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed. Order matters.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(base), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Seed for an independent sub-stream identified by `salt`.
#[inline]
pub fn substream(seed: u64, salt: u64) -> u64 {
    derive_seed(seed, &[salt])
}

/// Maps a value in `[0, 1)` from a seed (53 random bits).
#[inline]
pub fn unit_from_seed(seed: u64) -> f64 {
    (splitmix64(seed) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
