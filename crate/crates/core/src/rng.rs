//! Counter-based random streams addressed by `(seed, level, realization, history)`.
//!
//! Each history owns a ChaCha8 stream whose key is built from the master
//! seed, the level, the realization index and an ensemble tag, and whose
//! stream id is the history index. Any history can therefore be replayed on
//! its own, independent of how work was scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Address of an ensemble of histories: one realization on one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub level: usize,
    pub realization: u64,
    /// Distinguishes ensembles that share `(seed, level, realization)` but
    /// must not share histories, e.g. the two methods of a comparison study.
    pub tag: u64,
}

impl StreamKey {
    pub fn new(seed: u64, level: usize, realization: u64) -> Self {
        Self {
            seed,
            level,
            realization,
            tag: 0,
        }
    }

    pub fn with_tag(self, tag: u64) -> Self {
        Self { tag, ..self }
    }

    /// The random stream of history `history` in this ensemble.
    pub fn history(&self, history: u64) -> RngStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.level as u64).to_le_bytes());
        key[16..24].copy_from_slice(&self.realization.to_le_bytes());
        key[24..].copy_from_slice(&self.tag.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(history);
        RngStream { rng }
    }
}

/// Uniform deviates for one particle history.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1]`; safe to take the logarithm of.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Isotropic direction cosine on `[-1, 1]`, excluding `0`.
    #[inline]
    pub fn direction(&mut self) -> f64 {
        loop {
            let mu = 2.0 * self.uniform() - 1.0;
            if mu != 0.0 {
                return mu;
            }
        }
    }
}
