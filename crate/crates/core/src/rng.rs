//! Seed plumbing. Every random stream in the crate is a `ChaCha8Rng` keyed by
//! a seed derived from a master seed plus a path of integers, so streams for
//! different (round, client) pairs never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `seed`. Order matters: `derive(s, &[1, 2]) != derive(s, &[2, 1])`.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(seed: u64, path: &[u64]) -> Rng {
    rng_from(derive(seed, path))
}

/// Domain tags for [`derive`] paths.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const POISON: u64 = 4;
    pub const CALIBRATION: u64 = 5;
    pub const DATA: u64 = 6;
    pub const PROBE: u64 = 7;
    pub const SELECT: u64 = 8;
}
