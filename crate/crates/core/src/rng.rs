//! Deterministic random streams.
//!
//! Every stochastic step draws from a ChaCha8 stream whose seed is derived
//! from the master seed and a tuple of labels, so results never depend on
//! the order in which parallel tasks happen to run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels for the independent consumers inside a run.
pub mod stream {
    pub const OPERATORS: u64 = 1;
    pub const EVALUATION: u64 = 2;
    pub const SWITCH: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const MODEL: u64 = 5;
    pub const INIT: u64 = 6;
    pub const STATS: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of labels into a new 64-bit seed.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derive(seed: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, labels))
}
