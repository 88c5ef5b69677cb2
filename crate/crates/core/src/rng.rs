//! Seed derivation. Every random stream in the pipeline is a ChaCha8 stream
//! keyed by a master seed mixed with a path of stream indices, so results do
//! not depend on which worker consumes which stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of stream indices into a master seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// Stream tags keep the different consumers of one master seed apart.
pub mod tag {
    pub const SCALE: u64 = 1;
    pub const BLOCK: u64 = 2;
    pub const POSE: u64 = 3;
    pub const CAMERA: u64 = 4;
    pub const RESAMPLE: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const JITTER: u64 = 7;
    pub const OBJECT: u64 = 8;
}
