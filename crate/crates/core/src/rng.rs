//! Reproducible random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream, selected by
//! `(master seed, trajectory index)`. ChaCha is counter based, so streams
//! are independent and the numbers a trajectory sees never depend on how
//! many workers run the ensemble or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Stream = ChaCha8Rng;

/// Random stream for trajectory `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[inline]
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
