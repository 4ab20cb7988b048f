use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training samples.
    pub train_loss: f64,
    /// Train-mode accuracy over the epoch's batches.
    pub train_acc: f64,
    /// Eval-mode accuracy on the validation split.
    pub val_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best_val_acc(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.val_acc).reduce(f64::max)
    }

    /// Bitwise equality of everything except wall-clock time.
    pub fn same_trajectory(&self, other: &TrainingHistory) -> bool {
        self.len() == other.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.train_acc.to_bits() == b.train_acc.to_bits()
                    && a.val_acc.to_bits() == b.val_acc.to_bits()
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_acc,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{},{:.3}", e.epoch, e.train_loss, e.train_acc, e.val_acc, e.seconds);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
