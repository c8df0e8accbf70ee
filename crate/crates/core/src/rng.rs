//! Counter-based random stream derivation.
//!
//! Every random draw in a run comes from a stream keyed by
//! `(seed, agent, iteration, purpose)`. Streams never depend on the order in
//! which agents are processed, so sequential and parallel schedules produce
//! bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    /// Sample/direction pairs drawn by an optimizer at one iteration.
    Batch = 1,
    /// Measurement draws (stationarity estimates and similar).
    Metric = 2,
    /// Output selection at the end of a run.
    Output = 3,
    /// Dataset shuffling and partitioning.
    Partition = 4,
    /// Free-form draws (Lipschitz probing, tests).
    Aux = 5,
}

/// Key of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub agent: u64,
    pub iter: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(seed: u64, agent: usize, iter: u64, purpose: Purpose) -> Self {
        Self {
            seed,
            agent: agent as u64,
            iter,
            purpose,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        stream(self.seed, self.agent, self.iter, self.purpose)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the ChaCha stream for `(seed, agent, iter, purpose)`.
pub fn stream(seed: u64, agent: u64, iter: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for word in [agent, iter, purpose as u64] {
        state ^= word.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ acc;
        acc = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
