//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a [`SeedSpec`]: a master
//! seed plus a stream index. Work items (replicates, posterior draws, the two
//! sides of a draw pair) derive their own child specs, so results do not
//! depend on the order or the thread in which items are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Root spec for a master seed (stream 0).
    pub const fn root(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Derives the spec of the `index`-th child work item.
    ///
    /// Children of distinct parents or with distinct indices land on
    /// unrelated streams of the same master seed.
    pub fn child(&self, index: u64) -> Self {
        let stream = mix64(self.stream ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019)));
        Self {
            seed: self.seed,
            stream,
        }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
