//! Named random substreams derived from a single 64-bit seed.
//!
//! Every component draws from its own ChaCha stream so that, for example,
//! changing the number of Gibbs particles does not perturb the hyper-parameter
//! draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data,
    Particles,
    Lmc,
    Rjmcmc,
    Hypers,
    Init,
    Eval,
    Sample,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Data => 0,
            Stream::Particles => 1,
            Stream::Lmc => 2,
            Stream::Rjmcmc => 3,
            Stream::Hypers => 4,
            Stream::Init => 5,
            Stream::Eval => 6,
            Stream::Sample => 7,
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Deterministic per-item stream used for fan-out work (one stream per edge).
pub fn item_stream(seed: u64, item: usize) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item as u64);
    rng
}
