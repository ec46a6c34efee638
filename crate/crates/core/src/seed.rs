//! Deterministic seed derivation.
//!
//! Every randomized routine takes a master seed and derives one child seed per
//! work item before any dispatch, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed number `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(mix(master).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Independent stream for a named purpose (shuffles, weight init, ...).
pub fn derive_stream(master: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(mix(master ^ 0x5851_f42d_4c95_7f2d), |acc, b| mix(acc ^ u64::from(b)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
