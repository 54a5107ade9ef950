//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is the tuple
//! `(master seed, replication, dimension, row)`. Streams never share state,
//! so the output is independent of evaluation order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row key reserved for the digital shift of a dimension.
pub const SHIFT_ROW: u64 = u64::MAX;

/// Row key reserved for per-point sampling streams (not used by scrambles).
pub const AUX_ROW: u64 = u64::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replication: u64,
    pub dimension: u64,
    pub row: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replication: u64, dimension: u64, row: u64) -> Self {
        StreamKey { seed, replication, dimension, row }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replication.to_le_bytes());
        key[16..24].copy_from_slice(&self.dimension.to_le_bytes());
        key[24..32].copy_from_slice(&self.row.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

pub fn keyed_rng(seed: u64, replication: u64, dimension: u64, row: u64) -> ChaCha8Rng {
    StreamKey::new(seed, replication, dimension, row).rng()
}
