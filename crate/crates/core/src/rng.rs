//! Seeded random streams. Every consumer derives an independent ChaCha
//! stream from a master seed and a stream label, so results do not depend on
//! thread scheduling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream labels used across the crate.
pub mod streams {
    pub const ESTIMATE_A: u64 = 1;
    pub const ESTIMATE_B: u64 = 2;
    pub const DITHER: u64 = 3;
    pub const FROZEN: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const MESSAGE: u64 = 6;
    pub const SAMPLING: u64 = 7;
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A fresh seed for a derived stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    substream(seed, stream).next_u64()
}

/// Per-row samplers for a row-stochastic table stored row-major.
pub struct RowSampler {
    rows: Vec<WeightedIndex<f64>>,
}

impl RowSampler {
    pub fn new(table: &[f64], cols: usize) -> Self {
        let rows = table.chunks(cols).map(|r| WeightedIndex::new(r).expect("rows are validated stochastic")).collect();
        RowSampler { rows }
    }

    pub fn sample<R: Rng + ?Sized>(&self, row: usize, rng: &mut R) -> usize {
        self.rows[row].sample(rng)
    }
}

/// Draw an index with probability proportional to `weights`. Returns `None`
/// when all weights are zero.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if r < acc {
                return Some(i);
            }
        }
    }
    last
}
