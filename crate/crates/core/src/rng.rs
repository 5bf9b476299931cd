//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream derived from
//! the run seed and a purpose tag, so adding or reordering consumers never
//! perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes that own an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Sampler = 3,
    Generator = 4,
    Split = 5,
}

/// Stream for `purpose`, further split by `index` (epoch, node id, ...).
pub fn stream(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) ^ index);
    rng
}
