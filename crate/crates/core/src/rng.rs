//! Named, reproducible random streams.
//!
//! A stream is keyed by `(seed, stream_id)`. The ChaCha8 key is the SHA-256
//! digest of the little-endian seed followed by the UTF-8 id, so data order,
//! initialization and curve-`t` sampling can be reproduced independently of
//! each other and of the platform.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: impl Into<String>) -> Self {
        let stream_id = stream_id.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(stream_id.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            seed,
            stream_id,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// A fresh stream on the same seed with id `"{parent}/{name}"`.
    pub fn derive(&self, name: &str) -> Self {
        Self::new(self.seed, format!("{}/{}", self.stream_id, name))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    /// Next draw from U[0, 1).
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Next draw from N(mean, stddev²). `stddev == 0` returns `mean` exactly.
    pub fn gaussian(&mut self, mean: f64, stddev: f64) -> Result<f64> {
        if !(stddev >= 0.0) || !stddev.is_finite() {
            return Err(Error::invalid(format!(
                "gaussian stddev must be finite and >= 0, got {stddev}"
            )));
        }
        let z: f64 = self.rng.sample(StandardNormal);
        if stddev == 0.0 {
            return Ok(mean);
        }
        Ok(mean + stddev * z)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
