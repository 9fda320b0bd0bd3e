//! Counter-based random streams.
//!
//! Every sample owns a stream keyed by `(seed, stream_index)`. The ChaCha
//! block function is applied to the 64-bit seed as key and the sample index
//! as stream id, so sample `i` sees the same numbers regardless of which
//! worker simulates it or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stream for one sample.
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, stream_index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_index);
    rng
}

/// Uniform draw on the half-open interval (0, 1].
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Uniform draw on [0, 1).
#[inline]
pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
