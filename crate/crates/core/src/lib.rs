//! AMemNet: memory-augmented adversarial early action prediction on
//! precomputed feature vectors.

pub mod baseline;
pub mod data;
pub mod discriminator;
pub mod encoder;
pub mod error;
pub mod evalfuse;
pub mod memory;
pub mod model;
pub mod numerics;
pub mod optim;
pub mod rng;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
