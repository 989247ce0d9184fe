//! Seed derivation.
//!
//! One user-facing seed drives every stochastic stage. Each stage and work
//! item gets its own ChaCha stream derived from `(seed, stage, index)`, so
//! results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage identifiers mixed into derived seeds.
pub mod stage {
    pub const GENERATE: u64 = 1;
    pub const EIGEN_START: u64 = 2;
    pub const ANNEAL: u64 = 3;
    pub const FIT: u64 = 4;
    pub const SWEEP: u64 = 5;
    pub const TEST_MODEL: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stage: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stage.wrapping_mul(0x1000_0000_01B3) ^ splitmix64(index)))
}

pub fn stream(seed: u64, stage: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stage, index))
}
