//! Shuffled, augmented and standardized mini-batches.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::TILE_SIZE;

use super::augment::{augment_image, AugmentationConfig};
use super::dataset::Sample;
use super::normalize::NormalizationStats;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub batch_size: usize,
    /// Seeds both the visiting order and the per-position augmentation streams.
    pub seed: u64,
    pub shuffle: bool,
    pub augmentation: Option<AugmentationConfig>,
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// `[B, 3, 64, 64]`, standardized.
    pub x: Tensor<f32>,
    pub labels: Vec<usize>,
    /// Positions of the members in the source slice.
    pub indices: Vec<usize>,
}

pub struct Batches<'a> {
    samples: &'a [Sample],
    norm: NormalizationStats,
    config: BatchConfig,
    order: Vec<usize>,
    pos: usize,
}

pub fn batches<'a>(samples: &'a [Sample], norm: &NormalizationStats, config: &BatchConfig) -> Result<Batches<'a>> {
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if let Some(aug) = &config.augmentation {
        aug.validate()?;
    }
    let order = if config.shuffle {
        Rng::new(config.seed).permutation(samples.len())
    } else {
        (0..samples.len()).collect()
    };
    Ok(Batches { samples, norm: *norm, config: config.clone(), order, pos: 0 })
}

impl Batches<'_> {
    pub fn len(&self) -> usize {
        self.order.len().div_ceil(self.config.batch_size)
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.config.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        let start = self.pos;
        self.pos = end;

        let plane = 3 * TILE_SIZE * TILE_SIZE;
        let mut x = vec![0.0f32; indices.len() * plane];
        let aug = self.config.augmentation;
        let seed = self.config.seed;
        x.par_chunks_mut(plane).zip(indices.par_iter()).enumerate().for_each(|(k, (dst, &idx))| {
            let image = &self.samples[idx].image;
            match &aug {
                Some(cfg) => {
                    let mut rng = Rng::derive(seed ^ cfg.seed, (start + k) as u64);
                    let params = cfg.draw(&mut rng);
                    let out = augment_image(image, &params).expect("samples are validated CHW");
                    dst.copy_from_slice(out.data());
                }
                None => dst.copy_from_slice(image.data()),
            }
            self.norm.apply(dst);
        });
        let labels = indices.iter().map(|&i| self.samples[i].label.index()).collect();
        let x = Tensor::from_vec(&[indices.len(), 3, TILE_SIZE, TILE_SIZE], x).expect("batch shape");
        Some(Batch { x, labels, indices })
    }
}

/// Standardizes a set of samples into one `[N, 3, 64, 64]` tensor, without augmenting.
pub fn stack_normalized(samples: &[&Sample], norm: &NormalizationStats) -> Tensor<f32> {
    let plane = 3 * TILE_SIZE * TILE_SIZE;
    let mut x = vec![0.0f32; samples.len() * plane];
    x.par_chunks_mut(plane).zip(samples.par_iter()).for_each(|(dst, s)| {
        dst.copy_from_slice(s.image.data());
        norm.apply(dst);
    });
    Tensor::from_vec(&[samples.len(), 3, TILE_SIZE, TILE_SIZE], x).expect("batch shape")
}
