//! Stratified train / validation / test partition.

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::classes::{LandCoverClass, NUM_CLASSES};
use super::dataset::Sample;

/// Smallest class size that still gives every split at least one member.
pub const MIN_PER_CLASS: usize = 10;

pub trait Labeled {
    fn label(&self) -> LandCoverClass;
}

impl Labeled for Sample {
    fn label(&self) -> LandCoverClass {
        self.label
    }
}

impl Labeled for LandCoverClass {
    fn label(&self) -> LandCoverClass {
        *self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { validation: 0.1, test: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit<S = Sample> {
    pub train: Vec<S>,
    pub validation: Vec<S>,
    pub test: Vec<S>,
    pub seed: u64,
}

fn share(count: usize, ratio: f64) -> usize {
    // The epsilon keeps e.g. 2700 × 0.1 from flooring to 269.
    (count as f64 * ratio + 1e-9).floor() as usize
}

/// Per class: shuffle members with the seeded generator, take `⌊n·test⌋` for
/// test, `⌊n·validation⌋` for validation, and the rest for training.
pub fn split_dataset<S: Labeled>(samples: Vec<S>, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit<S>> {
    if ratios.validation <= 0.0 || ratios.test <= 0.0 || ratios.validation + ratios.test >= 1.0 {
        return Err(Error::Config(format!("invalid split ratios {ratios:?}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label().index()].push(i);
    }
    for (k, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < MIN_PER_CLASS {
            return Err(Error::Stratification {
                class: LandCoverClass::ALL[k].display_name().to_string(),
                count: members.len(),
                min: MIN_PER_CLASS,
            });
        }
    }
    let mut rng = Rng::new(seed);
    let mut assignment = vec![0u8; samples.len()];
    let mut order = Vec::with_capacity(samples.len());
    for members in &mut by_class {
        rng.shuffle(members);
        let n = members.len();
        let (n_test, n_val) = (share(n, ratios.test), share(n, ratios.validation));
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = if pos < n_test {
                2
            } else if pos < n_test + n_val {
                1
            } else {
                0
            };
        }
        order.extend(members.iter().copied());
    }
    let mut slots: Vec<Option<S>> = samples.into_iter().map(Some).collect();
    let mut split = DatasetSplit { train: Vec::new(), validation: Vec::new(), test: Vec::new(), seed };
    for i in order {
        let s = slots[i].take().expect("each sample assigned once");
        match assignment[i] {
            0 => split.train.push(s),
            1 => split.validation.push(s),
            _ => split.test.push(s),
        }
    }
    rng.shuffle(&mut split.train);
    Ok(split)
}
