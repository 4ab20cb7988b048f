use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dataset::Sample;

/// Per-channel mean and standard deviation of `[0, 1]`-scaled pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl NormalizationStats {
    /// Standardizes a CHW buffer in place.
    pub fn apply(&self, chw: &mut [f32]) {
        let plane = chw.len() / 3;
        for (c, chunk) in chw.chunks_mut(plane).enumerate() {
            let (m, inv) = (self.mean[c], 1.0 / self.std[c]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) * inv);
        }
    }
}

/// Population statistics over every pixel of the training samples.
pub fn compute_normalization(train: &[Sample]) -> Result<NormalizationStats> {
    if train.is_empty() {
        return Err(Error::Config("normalization statistics need at least one sample".into()));
    }
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    let mut count = 0usize;
    for s in train {
        let d = s.image.data();
        let plane = d.len() / 3;
        for c in 0..3 {
            for &v in &d[c * plane..(c + 1) * plane] {
                let v = v as f64;
                sum[c] += v;
                sum_sq[c] += v * v;
            }
        }
        count += plane;
    }
    let n = count as f64;
    let mut stats = NormalizationStats { mean: [0.0; 3], std: [0.0; 3] };
    for c in 0..3 {
        let mean = sum[c] / n;
        let var = (sum_sq[c] / n - mean * mean).max(0.0);
        if var.sqrt() < 1e-9 {
            return Err(Error::DegenerateStats { channel: c });
        }
        stats.mean[c] = mean as f32;
        stats.std[c] = var.sqrt() as f32;
    }
    Ok(stats)
}
