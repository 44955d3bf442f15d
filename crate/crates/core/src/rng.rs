//! Seeded uniform streams.
//!
//! Every stochastic routine in the crate draws from a [`UniformStream`]
//! identified by `(seed, stream)`. The stream is a ChaCha8 keystream whose
//! key is derived from the seed and whose stream word is the index, so
//! sub-streams are independent of each other and of the order in which
//! they are consumed. Serial and parallel batch runs therefore agree.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Next draw from the open interval (0, 1).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}
