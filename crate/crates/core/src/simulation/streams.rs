//! Independent random streams keyed by (master seed, cell, replicate,
//! purpose), so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Coordinates and predictors of the complexity experiment.
    Design = 1,
    /// A full synthetic dataset of the accuracy experiment.
    Dataset = 2,
    /// Datasets of the timing benchmark.
    Benchmark = 3,
}

/// A ChaCha stream whose key is the tuple itself; distinct tuples give
/// independent streams.
pub fn stream(master: u64, cell: u64, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&cell.to_le_bytes());
    key[16..24].copy_from_slice(&replicate.to_le_bytes());
    key[24..].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
