//! Seeded, splittable, serializable randomness.
//!
//! Every stochastic component draws from a [`SimRng`]. The generator is
//! ChaCha8, whose output is specified independently of platform and word
//! size, and whose 64-bit stream selector gives the `(seed, env_index)`
//! splitting used by the vectorized executor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

pub type SimRng = ChaCha8Rng;

/// Generator for a single stream derived from `seed`.
pub fn seeded_rng(seed: u64) -> SimRng {
    stream_rng(seed, 0)
}

/// Generator for stream `index` of `seed`. Distinct indices never overlap.
pub fn stream_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed material handed to an environment on reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvSeed {
    pub seed: u64,
    pub stream: u64,
}

impl EnvSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> SimRng {
        stream_rng(self.seed, self.stream)
    }
}

impl From<u64> for EnvSeed {
    fn from(seed: u64) -> Self {
        EnvSeed::new(seed)
    }
}

pub fn gaussian(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec(rng: &mut SimRng, std: f64) -> Vec2 {
    if std == 0.0 {
        return Vec2::ZERO;
    }
    Vec2::new(gaussian(rng) * std, gaussian(rng) * std)
}

pub fn unit_vector(rng: &mut SimRng) -> Vec2 {
    Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}
