use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::AugmentationConfig;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, ArchitectureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Augment training batches. Validation is never augmented.
    pub augment: bool,
    pub augmentation: AugmentationConfig,
    pub architecture: ArchitectureSpec,
    pub adam: AdamConfig,
    /// After each epoch, reset batch-norm running statistics to population
    /// averages over the (unaugmented) training set with dropout disabled.
    pub recalibrate_batchnorm: bool,
    /// Where the best checkpoint is written when training ends.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
            augment: true,
            augmentation: AugmentationConfig::default(),
            architecture: ArchitectureSpec::default(),
            adam: AdamConfig::default(),
            recalibrate_batchnorm: true,
            checkpoint_path: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.augment {
            self.augmentation.validate()?;
        }
        self.architecture.shapes()?;
        Ok(())
    }
}
