//! Deterministic derivation of independent RNG streams from a user seed.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` keyed by
//! `(seed, purpose, key)`, so a question's split does not depend on which
//! other questions exist, and an epoch's shuffle does not depend on how many
//! draws earlier epochs made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, purpose: &str, key: &str) -> u64 {
    let a = splitmix64(seed ^ fnv1a(purpose.as_bytes()));
    splitmix64(a ^ fnv1a(key.as_bytes()).rotate_left(17))
}

pub fn rng_for(seed: u64, purpose: &str, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose, key))
}

/// A uniform draw in `[0, 1)` that is a pure function of its inputs.
pub fn unit_hash(seed: u64, purpose: &str, key: &str) -> f64 {
    (derive_seed(seed, purpose, key) >> 11) as f64 / (1u64 << 53) as f64
}
