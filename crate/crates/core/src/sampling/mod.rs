//! Seeded samplers for stable laws, Lévy paths and the Poisson particle field.

mod particles;
mod path;
mod stable;

pub(crate) use particles::sample_field_with;
pub use particles::{sample_particle_field, weight_mass, Particle, ParticleField, TailSampler};
pub use path::{
    grid_len, read_path_binary, simulate_path, steps_before, write_path_binary, PathGrid,
    PathSimulator,
};
pub use stable::{sample_stable_increment, StableSampler};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::QuadError;

/// Concrete generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// Identifies one logical random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    pub fn rng(&self) -> StreamRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Sibling stream under the same seed.
    pub fn with_stream(&self, stream_id: u64) -> RngSpec {
        RngSpec {
            seed: self.seed,
            stream_id,
        }
    }

    /// Child stream `index` of this stream. Children of distinct parents live
    /// under distinct derived seeds.
    pub fn child(&self, index: u64) -> RngSpec {
        RngSpec {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id ^ 0x5bd1_e995_0000_0001)),
            stream_id: index,
        }
    }

    /// Stream reserved for a named purpose, kept apart from replica indices.
    pub fn tagged(&self, tag: &str) -> RngSpec {
        let h = tag
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        RngSpec {
            seed: splitmix64(self.seed ^ h),
            stream_id: self.stream_id,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("weight measure mass is not finite: {0}")]
    DivergentMass(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("malformed path dump: {0}")]
    Format(String),
}
