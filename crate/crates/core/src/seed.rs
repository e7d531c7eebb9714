//! Seed derivation.
//!
//! Every random stage draws from a `ChaCha8Rng` seeded with a 64-bit stage
//! seed. Stage seeds are derived from one master seed as the first eight bytes
//! (little endian) of
//!
//! ```text
//! SHA-256( master.to_le_bytes() || label || 0x00 || index.to_le_bytes() )
//! ```
//!
//! where `label` names the stage (`"plant"`, `"noise"`, `"sketch"`, ...) and
//! `index` distinguishes repeated uses of the same stage (sweep cell, trial).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Name of the generator recorded in configs and file headers.
pub const RNG_NAME: &str = "chacha8";

pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
