//! Hierarchical keyed randomness.
//!
//! Every actor in a run (learner, model, evaluator, sample draw) owns its own
//! stream, derived from a 64-bit master seed and a key path like
//! `arm:0/trial:17/role:1`. Streams with distinct paths are independent, and
//! the same (seed, path) always reproduces the same stream, so runs replay
//! byte-for-byte regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The concrete RNG handed to actors. Deterministic given its keyed seed.
pub type StreamRng = ChaCha8Rng;

/// Key-path tag for the two estimate arms of a distinction run.
pub const TAG_ARM: &str = "arm";
/// Key-path tag for a trial (one interaction, or one experiment trial).
pub const TAG_TRIAL: &str = "trial";
/// Key-path tag separating the evaluator's coins from the black box's coins.
pub const TAG_ROLE: &str = "role";

/// Arm index for the model under evaluation.
pub const ARM_MODEL: u64 = 0;
/// Arm index for the ground-truth capability.
pub const ARM_CAPABILITY: u64 = 1;
/// Role index for the evaluator's coins inside one interaction.
pub const ROLE_EVALUATOR: u64 = 0;
/// Role index for the black box's coins inside one interaction.
pub const ROLE_BOX: u64 = 1;

/// A master seed plus a key path. Children refine the path; `rng()` finalizes
/// the path into a concrete stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomSource {
    seed: u64,
    path: Vec<(String, u64)>,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource { seed, path: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive a child source with one extra `(tag, index)` path segment.
    pub fn child(&self, tag: &str, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push((tag.to_string(), index));
        RandomSource { seed: self.seed, path }
    }

    /// Human-readable key, e.g. `"seed:42/arm:0/trial:3"`. Used by ledgers to
    /// assert that two draws never shared a stream.
    pub fn key_string(&self) -> String {
        let mut s = format!("seed:{}", self.seed);
        for (tag, index) in &self.path {
            s.push('/');
            s.push_str(tag);
            s.push(':');
            s.push_str(&index.to_string());
        }
        s
    }

    /// Finalize the path into a stream. The seed bytes are a SHA-256 digest of
    /// the master seed and the full path, so distinct paths give independent
    /// streams and equal paths reproduce the same one.
    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        for (tag, index) in &self.path {
            hasher.update((tag.len() as u64).to_le_bytes());
            hasher.update(tag.as_bytes());
            hasher.update(index.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed_bytes = [0u8; 32];
        seed_bytes.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed_bytes)
    }
}
