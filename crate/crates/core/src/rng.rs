//! Deterministic per-job randomness.
//!
//! Every synthetic output draws from a stream keyed by (master seed, output
//! index), so results are identical across runs, worker counts, and
//! scheduling orders.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// RNG for output `index` under `master_seed`.
pub fn derive_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
