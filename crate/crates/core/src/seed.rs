//! Stable seed derivation.
//!
//! Every random decision in a run is a pure function of the master seed and
//! a path of integers (condition, trial index, turn, ...). SplitMix64 is used
//! as the mixing function because its output is fixed across platforms and
//! releases.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 finalisation step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into a single 64-bit seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Maps a 64-bit value to a uniform draw in `[0, 1)` using the top 53 bits.
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
