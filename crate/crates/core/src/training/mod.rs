//! Training loop, evaluation and checkpoint persistence.

mod checkpoint;
mod config;
mod eval;
mod history;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::TrainingConfig;
pub use eval::{evaluate, predict_labels, ConfusionMatrix, EvalReport, EVAL_BATCH};
pub use history::{EpochRecord, TrainingHistory};
pub use train::{train, train_with};
