//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`SeededRng`], which is ChaCha8
//! keyed through `SeedableRng::seed_from_u64`. ChaCha8 output is defined
//! bit-for-bit by its algorithm, so a seed produces the same stream on every
//! platform and every build. Child streams (per model, per split, per
//! `(user, item)` cell) are derived with the SplitMix64 finalizer rather than
//! by sharing one generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a string label.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the parent.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(mix64(parent) ^ h)
}

/// Hash-derived value for a `(seed, a, b)` triple, uniform on `[0, 1)`.
pub fn cell_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let h = mix64(mix64(mix64(seed) ^ a) ^ b.rotate_left(32));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
