//! Deterministic stream derivation.
//!
//! Every random draw in this crate comes from a ChaCha stream whose key is a
//! SHA-256 hash of the master seed, a domain tag, and an index path. Streams
//! for different paths are independent for all practical purposes, results
//! never depend on evaluation order or worker count, and an auditor holding
//! the master seed can replay any single trial in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Domain tags keep streams for different purposes disjoint even when their
/// index paths coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Noise direction draws inside `perturb` (path: retry index).
    NoiseDirection,
    /// Subsample index draws inside calibration (path: b index, q index, trial).
    Subsample,
    /// Noise seeds for calibration trials (path: b index, q index, trial).
    TrialNoise,
    /// Column draws inside the synthetic generator (path: column index).
    SynthColumn,
    /// Error-vector draw inside the synthetic generator.
    SynthError,
}

impl Domain {
    fn tag(self) -> &'static [u8] {
        match self {
            Domain::NoiseDirection => b"noise-direction",
            Domain::Subsample => b"subsample",
            Domain::TrialNoise => b"trial-noise",
            Domain::SynthColumn => b"synth-column",
            Domain::SynthError => b"synth-error",
        }
    }
}

/// Derives the ChaCha stream for `(master_seed, domain, path)`.
pub fn derive_rng(master_seed: u64, domain: Domain, path: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([domain.tag().len() as u8]);
    hasher.update(domain.tag());
    for part in path {
        hasher.update(part.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
