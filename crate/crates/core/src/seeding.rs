//! Deterministic derivation of independent random streams from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout the crate.
pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream label; distinct labels give unrelated seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Same as [`derive_seed`] with a two-part label.
pub fn derive_seed2(master: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(master, a), b)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream tags, so that derived seeds for different purposes never collide.
pub(crate) mod stream {
    pub const VEHICLE: u64 = 0x5645_4849;
    pub const GIANT_ROUTE: u64 = 0x4752;
    pub const PATH: u64 = 0x5041_5448;
    pub const RUN: u64 = 0x52_554e;
    pub const FIELD: u64 = 0x4649_454c;
    pub const MISSION: u64 = 0x4d49_5353;
    pub const KMEANS: u64 = 0x4b4d;
}
