//! Deterministic stream derivation.
//!
//! All randomness flows from labelled ChaCha8 substreams so that batch
//! results are identical for any worker count. A substream is addressed
//! by (seed, index, purpose); the 32-byte ChaCha key is the SHA-256 of
//! that tuple.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Counter-based generator for a (seed, index, purpose) substream.
pub fn substream(seed: u64, index: u64, purpose: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"qcl-substream");
    h.update(seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

/// 64-bit per-run seed derived from the batch master seed.
pub fn run_seed(master_seed: u64, run_id: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"qcl-run-seed");
    h.update(master_seed.to_le_bytes());
    h.update(run_id.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
