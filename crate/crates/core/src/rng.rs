//! Seeded random streams. Every random draw in training goes through here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type EcnnRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> EcnnRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of run `index` under master seed `master` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
