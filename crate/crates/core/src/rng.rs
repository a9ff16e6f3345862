//! Keyed random streams.
//!
//! Every draw in a run comes from a ChaCha stream addressed by
//! `(run key, purpose, round)`: the run key selects the ChaCha key, the
//! purpose selects the stream id, and the round selects a 256-word block of
//! the keystream. Draws for one purpose never perturb another, so two runs
//! that differ only in, say, the corruption channel see identical contexts,
//! latent outcomes and action-selection uniforms.

use rand::SeedableRng;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

const WORDS_PER_ROUND: u128 = 256;

/// What a draw is used for. Each purpose owns an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Context,
    Policy,
    Explore,
    Censor,
    Delay,
    Corrupt,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Context => 1,
            Purpose::Policy => 3,
            Purpose::Explore => 4,
            Purpose::Censor => 5,
            Purpose::Delay => 6,
            Purpose::Corrupt => 7,
        }
    }
}

/// Combine a master seed and a per-run seed into a run key.
pub fn run_key(master_seed: u64, seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng.next_u64()
}

/// Stream factory for a single run.
#[derive(Debug, Clone)]
pub struct Streams {
    base: ChaCha8Rng,
}

impl Streams {
    pub fn new(run_key: u64) -> Self {
        Streams {
            base: ChaCha8Rng::seed_from_u64(run_key),
        }
    }

    /// A fresh generator for `purpose` at `round`.
    pub fn at(&self, round: u64, purpose: Purpose) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(purpose.tag());
        rng.set_word_pos(u128::from(round) * WORDS_PER_ROUND);
        rng
    }
}
