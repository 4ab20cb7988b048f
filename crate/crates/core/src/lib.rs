//! Land-cover indicators from satellite imagery.
//!
//! The crate trains a compact CNN ("Satellite-Net") on 64×64 RGB scene tiles,
//! scans large images tile by tile into a [`ClassificationMatrix`], and turns
//! that matrix into per-class land-cover shares.
//!
//! Layout:
//! - [`tensor`] and [`rng`]: dense arrays, GEMM, im2col, seeded randomness.
//! - [`nn`]: layers, the network executor, Adam, finite-difference checks.
//! - [`data`]: class table, dataset loading, splitting, normalization,
//!   augmentation and batching.
//! - [`training`]: the training loop, evaluation and checkpoint files.
//! - [`scanner`]: tiling plans, sliding-window scans and map rendering.
//! - [`stats`]: land-cover share reports.

pub mod data;
pub mod error;
pub mod nn;
pub mod rng;
pub mod scanner;
pub mod stats;
pub mod tensor;
pub mod training;

pub use data::{LandCoverClass, Sample};
pub use error::{Error, Result};
pub use rng::Rng;
pub use scanner::{ClassificationMatrix, TilingPlan};
pub use stats::{LandCoverReport, Region};
pub use tensor::Tensor;
pub use training::Checkpoint;

/// Edge length in pixels of the square tiles the network classifies.
pub const TILE_SIZE: usize = 64;
