//! Seeding.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`], which produces the
//! same sequence on every platform. Independent streams for the different
//! stages of an experiment are derived from one root seed with
//! [`sub_seed`]: the first eight bytes (little endian) of
//! `SHA-256(root_seed.to_le_bytes() || name.as_bytes())`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of a named sub-stream from a root seed.
pub fn sub_seed(root: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
