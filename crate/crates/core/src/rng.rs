//! Seeded random streams.
//!
//! Every draw in the crate comes from a ChaCha20 generator keyed by the
//! user's master seed. ChaCha is counter based: the 64-bit stream id selects
//! an independent keystream without consuming state from any other stream.
//! The stream id is a mix of a purpose tag and up to two indices, so
//! `(seed, purpose, a, b)` alone determines every value a consumer sees,
//! independent of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Row subsets for resampling, indexed by `(component, resample)`.
    Subsample = 1,
    /// Rademacher signs of a generated loading, indexed by spike.
    LoadingSigns = 2,
    /// Scores and noise of generated data.
    Data = 3,
    /// Free-form streams for tests and harnesses.
    Auxiliary = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for `(purpose, a, b)`.
pub fn stream_id(purpose: Purpose, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(purpose as u64) ^ a) ^ b.rotate_left(32))
}

/// Generator for the given master seed and purpose/index triple.
pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, a, b));
    rng
}
