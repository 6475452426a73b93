//! Seed-stream discipline.
//!
//! Every random stream is a ChaCha8 generator keyed by the master seed and
//! positioned on its own ChaCha stream id, derived from `(trial, purpose)`.
//! ChaCha8 exposes 2^64 independent streams, so distinct `(trial, purpose)`
//! pairs never overlap. The generator choice is part of the reproducibility
//! contract: changing it changes every output byte.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Purpose {
    Destinations = 0,
    Selection = 1,
    Tetris = 2,
    Coupling = 3,
    Fault = 4,
    InitialConfiguration = 5,
    Topology = 6,
    Sampling = 7,
}

impl Purpose {
    pub const ALL: [Purpose; 8] = [
        Purpose::Destinations,
        Purpose::Selection,
        Purpose::Tetris,
        Purpose::Coupling,
        Purpose::Fault,
        Purpose::InitialConfiguration,
        Purpose::Topology,
        Purpose::Sampling,
    ];
}

/// Maximum trial index representable in a stream id.
pub const MAX_TRIAL: u64 = (1 << 56) - 1;

pub fn stream_id(trial: u64, purpose: Purpose) -> u64 {
    assert!(trial <= MAX_TRIAL, "trial index {trial} too large");
    (trial << 8) | purpose as u64
}

pub fn stream(master_seed: u64, trial: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(trial, purpose));
    rng
}
