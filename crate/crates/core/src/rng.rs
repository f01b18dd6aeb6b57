//! Seed streams.
//!
//! Every random quantity in an experiment is drawn from a ChaCha8 generator
//! keyed by the master seed; the purpose and an index select a disjoint
//! stream, laid out as `purpose << 56 | index`. Frames index their source
//! and noise streams by frame number alone, so every SNR point of a curve
//! sees the same source realizations and the same unit-variance noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Source = 1,
    Noise = 2,
    Interleaver = 3,
    Pilot = 4,
    Design = 5,
    Probabilities = 6,
}

const INDEX_MASK: u64 = (1 << 56) - 1;

pub fn stream_rng(master_seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((purpose as u64) << 56) | (index & INDEX_MASK));
    rng
}
