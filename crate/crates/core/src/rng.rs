//! Deterministic seed splitting.
//!
//! Every randomized operation takes one `u64` seed and derives independent
//! sub-streams from it with [`substream`], so results never depend on call
//! order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of a named sub-stream.
pub fn substream(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stateless hash of an unordered vertex pair under `seed`.
pub fn hash_unordered(seed: u64, a: usize, b: usize) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    splitmix64(substream(seed, lo as u64) ^ splitmix64(hi as u64 ^ 0x5851_F42D_4C95_7F2D))
}

/// Map a hash to a uniform value in `[-1, 1]`.
pub fn unit_symmetric(h: u64) -> f64 {
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * u - 1.0
}

pub mod streams {
    pub const GENERATION: u64 = 1;
    pub const MATCHING: u64 = 2;
    pub const PERTURBATION: u64 = 3;
    pub const SKETCH: u64 = 4;
    pub const MEANS: u64 = 5;
    pub const PERMUTATION: u64 = 6;
    pub const WALKS: u64 = 7;
    pub const ORACLE_NOISE: u64 = 8;
    pub const LANCZOS: u64 = 9;
}
