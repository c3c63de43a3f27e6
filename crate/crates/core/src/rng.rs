//! Counter-based random streams. Every `(seed, sample, step, component)` key
//! maps to its own ChaCha8 stream, so samples and steps can be generated in
//! any order or on any thread with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Key for the stream of one ensemble member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub sample: u64,
}

impl StreamKey {
    pub fn new(seed: u64, sample: u64) -> Self {
        Self { seed, sample }
    }

    /// Generator for the noise of `component` at time step `step`.
    pub fn stream(&self, step: u64, component: u8) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.sample.to_le_bytes());
        key[16..24].copy_from_slice(b"spdenois");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((step << 8) | component as u64);
        rng
    }
}
