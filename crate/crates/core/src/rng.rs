//! Deterministic random streams.
//!
//! Every random draw in the crate flows through [`rng_stream`], which maps a
//! `(seed, stream_id)` pair to an independent ChaCha8 stream. ChaCha output
//! is fully specified by its key and stream number, so sequences are
//! identical across platforms and across runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Master seed for an experiment. Wraps a `u64` so seeds cannot be
/// confused with other integer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

/// The concrete RNG handed out by [`rng_stream`].
pub type RngStream = ChaCha8Rng;

/// Derives a named substream from the master seed.
///
/// Streams with distinct `stream_id` are statistically independent, so
/// consumers (expert parameters, sample features, embedding noise, ...)
/// can draw from their own stream without perturbing each other.
pub fn rng_stream(seed: Seed, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(stream_id);
    rng
}
