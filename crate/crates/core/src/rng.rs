//! Seeded substreams.
//!
//! Every simulated path owns one ChaCha8 stream selected by `(seed, stream)`.
//! ChaCha is counter based, so the numbers a path sees do not depend on
//! which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RandomStream { seed, stream }
    }

    /// Substream `index` of this stream's seed. Paths are numbered this way.
    pub fn substream(&self, index: u64) -> Self {
        RandomStream {
            seed: self.seed,
            stream: index,
        }
    }

    /// A generator positioned at the start of this substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws one standard normal variate.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
