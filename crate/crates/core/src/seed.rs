//! Deterministic seed derivation.
//!
//! All randomness in the toolkit flows from a single study seed. Each
//! component derives its own stream seed as
//! `splitmix64(study_seed ^ fnv1a64(label))` and feeds it to a ChaCha8
//! generator. Both FNV-1a and splitmix64 are fixed, platform-independent
//! 64-bit functions, so any implementation of this scheme reproduces the
//! exact same streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the label bytes.
pub fn fnv1a64(label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a component seed from the study seed and a component label.
pub fn derive(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(label))
}

/// Derive an indexed seed, e.g. one per bootstrap replicate or per tree.
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(seed, label).wrapping_add(splitmix64(index)))
}

/// The project-wide RNG: ChaCha8, seeded from a derived 64-bit value.
pub fn rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label))
}

/// Indexed variant of [`rng`].
pub fn rng_indexed(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_indexed(seed, label, index))
}
