//! Algorithmic core of the fairscope pipeline.
//!
//! Everything in this crate is pure computation over in-memory data: spectral
//! decomposition, PCA, a small MLP with hand-written backpropagation, per-class
//! k-means over temporal feature vectors, concept sensitivity scoring,
//! bias-aware pair sampling, the four augmentation modes and the fairness
//! metrics. File formats, checkpoints and the command-line driver live in the
//! `fairscope` crate.
//!
//! The crate builds without `std` (it needs `alloc`); all transcendental
//! functions go through `libm` so results do not depend on the platform libm.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod augment;
pub mod clustering;
pub mod concepts;
pub mod data;
mod error;
pub mod fairness;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
pub use numerics::{Complex, Matrix, Spectrum, Tensor2D};
pub use rng::Rng;
