//! Seeded random-stream discipline.
//!
//! Every stochastic operation in the crate takes an explicit stream. Streams
//! are derived from `(master_seed, label, index)` by hashing the triple with
//! SHA-256, keeping the first eight bytes as a little-endian `u64`, and
//! seeding a ChaCha8 generator from it. Two calls with identical inputs yield
//! identical streams on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The concrete generator behind every stream.
pub type Stream = ChaCha8Rng;

/// 64-bit splitting hash of `seed ‖ label ‖ index`.
///
/// The label is length-prefixed so that `("ab", 1)` and `("a", …)` can never
/// collide through concatenation.
pub fn split_seed(master_seed: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Independent substream for `(master_seed, label, index)`.
pub fn derive_rng(master_seed: u64, label: &str, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(split_seed(master_seed, label, index))
}
