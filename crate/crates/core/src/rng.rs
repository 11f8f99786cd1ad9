//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`stream`], so a `(seed, stream)`
//! pair fully determines its sequence on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers.
pub mod streams {
    pub const NET_WEIGHTS: u64 = 1;
    pub const NET_INPUT: u64 = 2;
    pub const BLUR_NOISE: u64 = 3;
    pub const FREE_INIT: u64 = 4;
}

/// Sub-seed roles used by the solver to seed its two generators.
pub mod roles {
    pub const IMAGE_NET: u64 = 0x11;
    pub const RESIDUAL_NET: u64 = 0x22;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent seed for `role` from a run seed (splitmix64 finalizer).
pub fn derive(seed: u64, role: u64) -> u64 {
    let mut z = seed ^ role.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
