//! Deterministic random substreams.
//!
//! Every `(seed, point, trial, purpose)` tuple keys its own ChaCha8
//! generator, so draws never depend on scheduling or on which other
//! experiments share a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    ProfilePhases = 1,
    PriorSamples = 2,
    SyncPhase = 3,
    Noise = 4,
}

pub fn rng_stream(seed: u64, point: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    key[24..].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Stream key of a sweep point; points at the same distance share streams
/// across profiles and priors.
pub fn point_key(distance: f64) -> u64 {
    distance.to_bits()
}
