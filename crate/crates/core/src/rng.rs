//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`RngStream`]: a user seed plus
//! a stream id. Identical `(seed, stream id)` pairs yield identical draws no
//! matter how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Namespaces keep streams used by different subsystems disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Langevin = 1,
    Marginal = 2,
    DecoderInit = 3,
    Simulation = 4,
    KMeans = 5,
    Holdout = 6,
}

/// A seed together with a `(node, iteration, sample)` stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub domain: Domain,
    pub node: u64,
    pub iteration: u64,
    pub sample: u64,
}

impl RngStream {
    pub fn new(seed: u64, domain: Domain) -> Self {
        Self {
            seed,
            domain,
            node: 0,
            iteration: 0,
            sample: 0,
        }
    }

    pub fn node(mut self, node: usize) -> Self {
        self.node = node as u64;
        self
    }

    pub fn iteration(mut self, iteration: usize) -> Self {
        self.iteration = iteration as u64;
        self
    }

    pub fn sample(mut self, sample: usize) -> Self {
        self.sample = sample as u64;
        self
    }

    /// Builds the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = splitmix64(self.seed ^ 0x5851_f42d_4c95_7f2d);
        for word in [self.domain as u64, self.node, self.iteration, self.sample] {
            state = splitmix64(state ^ word.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
