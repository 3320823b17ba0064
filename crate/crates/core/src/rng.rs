//! Seed derivation. Every random stream in the pipeline is a ChaCha8 generator
//! keyed by a global seed plus the coordinates of the work item, so results do
//! not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(global: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(global), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream(global: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global, parts))
}

/// Stream tags keep unrelated uses of the same coordinates apart.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const DAE_NOISE: u64 = 3;
    pub const POLLUTE: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const PAIRS: u64 = 6;
    pub const CLASSIFIER: u64 = 7;
    pub const EVAL_CLASSIFIER: u64 = 8;
}
