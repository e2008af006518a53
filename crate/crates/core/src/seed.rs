//! Deterministic seed derivation.
//!
//! Every random stream in the simulator is a pure function of the scenario
//! seed and a small tuple of tags (vehicle id, purpose, round...). Streams are
//! derived by SplitMix64 mixing so that adding a consumer never perturbs the
//! draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a sequence of tags.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn rng(seed: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive(seed, tags))
}

/// Purpose tags, kept distinct so independent consumers never share a stream.
pub mod tag {
    pub const CLEAN_STREAM: u64 = 1;
    pub const INJECT: u64 = 2;
    pub const TRAINING: u64 = 3;
    pub const CAMPAIGN: u64 = 4;
    pub const NETWORK: u64 = 5;
    pub const FEDERATED: u64 = 6;
    pub const PRIVACY: u64 = 7;
    pub const CONSENSUS: u64 = 8;
    pub const LOCAL_DATA: u64 = 9;
    pub const PROFILE: u64 = 10;
}
