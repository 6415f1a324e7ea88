//! Per-query RNG derivation.
//!
//! Every sampled quantity (a run's negatives for one task, one task's
//! type-matched negatives, ...) gets its own RNG whose seed is derived from
//! the master seed and the coordinates of the thing being sampled. Results
//! therefore never depend on evaluation order or thread count, and reruns
//! with the same seed reproduce output byte for byte.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keeping independently sampled quantities on decorrelated
/// seed streams even when they share coordinates.
pub mod stream {
    /// Uniform negatives drawn by the random-sampling protocol.
    pub const RANDOM_NEGATIVES: u64 = 1;
    /// Type-matched negative generation.
    pub const TYPE_MATCHED: u64 = 2;
}

/// splitmix64 finalizer. Consecutive inputs map to well-mixed outputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds query coordinates into the master seed, mixing after every step so
/// that permuted or truncated coordinate lists land on different seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut acc = mix(master);
    for &p in parts {
        acc = mix(acc ^ p);
    }
    acc
}

/// RNG for one query, keyed by `(master, parts)`.
pub fn rng_for(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}
