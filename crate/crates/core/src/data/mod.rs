//! Land-cover classes, imagery ingestion, splitting, normalization,
//! augmentation and batching.

pub mod augment;
pub mod batches;
pub mod classes;
pub mod dataset;
pub mod normalize;
pub mod raster;
pub mod split;
pub mod synthetic;

pub use augment::{augment, augment_image, AugmentParams, AugmentationConfig};
pub use batches::{batches, stack_normalized, Batch, BatchConfig, Batches};
pub use classes::{class_table, ClassEntry, LandCoverClass, NUM_CLASSES};
pub use dataset::{load_dataset, write_skip_report, LoadedDataset, Sample, SkippedFile};
pub use normalize::{compute_normalization, NormalizationStats};
pub use split::{split_dataset, DatasetSplit, Labeled, SplitRatios, MIN_PER_CLASS};
pub use synthetic::{stitch, synthetic_dataset, synthetic_tile, write_synthetic_dataset};
