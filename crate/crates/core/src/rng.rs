//! Seed derivation.
//!
//! All randomness flows from ChaCha8 streams whose seeds are derived from a
//! root seed plus a path of integer coordinates (round, client, label, ...).
//! Derivation is a SplitMix64 fold, stable across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parts` into `root`, producing an independent child seed.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(root), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// A deterministic generator for the given seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Domain tags keep seeds for unrelated purposes apart.
pub mod tag {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const PARTITION: u64 = 0x5041_5254;
    pub const TRAIN: u64 = 0x5452_4149;
}
