//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`. ChaCha output is specified bit-for-bit, so a
//! given seed yields the same stream on every platform. Work that fans out
//! over independent units (grid cells, trials) uses distinct ChaCha streams of
//! the same key, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

pub type StreamRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under the key derived from `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `[lower, upper]` (the upper end is reachable only through rounding).
#[inline]
pub fn uniform_in<T: Real, R: Rng + ?Sized>(rng: &mut R, lower: T, upper: T) -> T {
    let u: f64 = rng.random();
    lower + T::lit(u) * (upper - lower)
}
