//! Deterministic seed derivation.
//!
//! Every random stream in a run is derived from the run seed and a path of
//! tags (phase, round, episode index). Streams therefore do not depend on the
//! order in which work is scheduled, which keeps parallel rollouts
//! reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Values are part of the reproducibility contract; do not renumber.
pub mod stream {
    pub const MISPARAMETRIZE: u64 = 1;
    pub const INIT_MODEL: u64 = 2;
    pub const PRETRAIN_ROLLOUT: u64 = 3;
    pub const PRETRAIN_TRAIN: u64 = 4;
    pub const POLICY_ROLLOUT: u64 = 5;
    pub const SP_ROLLOUT: u64 = 6;
    pub const SP_TRAIN: u64 = 7;
    pub const REAL_ROLLOUT: u64 = 8;
    pub const PSEUDO_REAL_TRUTH: u64 = 9;
    pub const FRAME_DUMP: u64 = 10;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(base), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(0x51_7C_C1_B7)))
    })
}

pub fn rng_for(base: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, tags))
}
