//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`), seeded
//! with `seed_from_u64(seed)` and split into independent sub-streams with
//! `set_stream(id)`. Normal variates use `rand_distr::StandardNormal`. Both
//! are portable, so a seed pins the exact bits of every dataset and model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::Tensor;

/// Stream ids of the form `purpose << 48 | index`.
pub mod purpose {
    pub const MODEL_INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const D_BATCH: u64 = 3;
    pub const PROTOTYPE: u64 = 4;
    pub const SAMPLE: u64 = 5;
    pub const BASELINE: u64 = 6;
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | index);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Glorot-uniform matrix, rounded to f32 so it survives archiving unchanged.
pub fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..limit) as f32 as f64)
        .collect();
    Tensor::matrix(rows, cols, data).expect("shape")
}

/// Gaussian matrix with the given standard deviation, rounded to f32.
pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| (std * normal(rng)) as f32 as f64).collect();
    Tensor::matrix(rows, cols, data).expect("shape")
}
