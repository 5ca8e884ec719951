//! Sub-seed derivation: every component of a run draws from its own stream,
//! derived from one global seed and the component's name.

use sha2::{Digest, Sha256};

/// `SHA-256(seed as little-endian bytes || name)`, first 8 bytes as a
/// little-endian `u64`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
