//! Seeded random streams.
//!
//! Every randomised unit of work (a house, a tree, a kernel block, an
//! ensemble member) draws from its own ChaCha stream keyed by
//! `(seed, unit)`, so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Independent stream `key` of the generator seeded with `seed`.
pub fn stream(seed: u64, key: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Stable 64-bit key for a textual unit name (house id, purpose tag).
pub fn key_of(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Stream for a named purpose combined with a numeric index.
pub fn named_stream(seed: u64, name: &str, index: u64) -> Rng {
    stream(seed, key_of(name) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
