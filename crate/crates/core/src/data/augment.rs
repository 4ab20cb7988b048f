//! Random zoom, rotation and flips of 64×64 training tiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::dataset::Sample;
use super::raster::sample_bilinear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Zoom factor range; `> 1` magnifies the tile centre.
    pub zoom: (f64, f64),
    /// Counter-clockwise rotation range in degrees.
    pub rotation_deg: (f64, f64),
    pub horizontal_flip: bool,
    pub vertical_flip: bool,
    /// Mixed into each epoch's augmentation streams.
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self { zoom: (0.8, 1.2), rotation_deg: (0.0, 30.0), horizontal_flip: true, vertical_flip: true, seed: 0 }
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub zoom: f64,
    pub angle_deg: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams { zoom: 1.0, angle_deg: 0.0, hflip: false, vflip: false };
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let (z0, z1) = self.zoom;
        let (r0, r1) = self.rotation_deg;
        if !(z0 > 0.0 && z0 <= z1) || !(r0 <= r1) {
            return Err(Error::Config(format!("invalid augmentation ranges {self:?}")));
        }
        Ok(())
    }

    /// Draws zoom and angle uniformly; each enabled flip fires with probability ½.
    pub fn draw(&self, rng: &mut Rng) -> AugmentParams {
        let zoom = rng.uniform(self.zoom.0, self.zoom.1);
        let angle_deg = rng.uniform(self.rotation_deg.0, self.rotation_deg.1);
        let hflip = rng.bernoulli(0.5) && self.horizontal_flip;
        let vflip = rng.bernoulli(0.5) && self.vertical_flip;
        AugmentParams { zoom, angle_deg, hflip, vflip }
    }
}

fn resample(src: &[f32], c: usize, h: usize, w: usize, map: impl Fn(f64, f64) -> (f64, f64)) -> Vec<f32> {
    let mut out = vec![0.0f32; src.len()];
    for i in 0..h {
        for j in 0..w {
            let (y, x) = map(i as f64, j as f64);
            for ch in 0..c {
                let plane = &src[ch * h * w..(ch + 1) * h * w];
                out[(ch * h + i) * w + j] = sample_bilinear(plane, h, w, y, x);
            }
        }
    }
    out
}

pub fn flip_horizontal(data: &mut [f32], c: usize, h: usize, w: usize) {
    for row in data.chunks_mut(w).take(c * h) {
        row.reverse();
    }
}

pub fn flip_vertical(data: &mut [f32], c: usize, h: usize, w: usize) {
    for ch in 0..c {
        let plane = &mut data[ch * h * w..(ch + 1) * h * w];
        for i in 0..h / 2 {
            let (top, bottom) = plane.split_at_mut((h - 1 - i) * w);
            top[i * w..(i + 1) * w].swap_with_slice(&mut bottom[..w]);
        }
    }
}

/// Rotation about the centre, then central zoom (both bilinear, edge
/// replicated), then flips. Identity parameters return the input exactly.
pub fn augment_image(image: &Tensor<f32>, p: &AugmentParams) -> Result<Tensor<f32>> {
    let (c, h, w) = match *image.shape() {
        [c, h, w] => (c, h, w),
        _ => return Err(Error::shape(format!("augment: expected CHW, got {:?}", image.shape()))),
    };
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut data = image.data().to_vec();
    if p.angle_deg != 0.0 {
        let (s, co) = p.angle_deg.to_radians().sin_cos();
        // Inverse map of a counter-clockwise rotation (y axis points down).
        data = resample(&data, c, h, w, |i, j| {
            let (dy, dx) = (i - cy, j - cx);
            (cy + s * dx + co * dy, cx + co * dx - s * dy)
        });
    }
    if p.zoom != 1.0 {
        let z = p.zoom;
        data = resample(&data, c, h, w, |i, j| (cy + (i - cy) / z, cx + (j - cx) / z));
    }
    if p.hflip {
        flip_horizontal(&mut data, c, h, w);
    }
    if p.vflip {
        flip_vertical(&mut data, c, h, w);
    }
    Tensor::from_vec(image.shape(), data)
}

pub fn augment(sample: &Sample, config: &AugmentationConfig, rng: &mut Rng) -> Result<Sample> {
    let params = config.draw(rng);
    Ok(Sample { image: augment_image(&sample.image, &params)?, label: sample.label, source: sample.source.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Fill;

    fn random_image(seed: u64) -> Tensor<f32> {
        Tensor::random(&[3, 64, 64], Fill::Uniform { low: 0.0, high: 1.0 }, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn identity_parameters() {
        let img = random_image(1);
        assert_eq!(augment_image(&img, &AugmentParams::IDENTITY).unwrap(), img);
    }

    #[test]
    fn flips_are_involutions() {
        let img = random_image(2);
        let h = AugmentParams { hflip: true, ..AugmentParams::IDENTITY };
        let once = augment_image(&img, &h).unwrap();
        assert_ne!(once, img);
        assert_eq!(augment_image(&once, &h).unwrap(), img);
        let v = AugmentParams { vflip: true, ..AugmentParams::IDENTITY };
        assert_eq!(augment_image(&augment_image(&img, &v).unwrap(), &v).unwrap(), img);
    }

    #[test]
    fn both_flips_rotate_by_half_turn() {
        let img = random_image(3);
        let both = AugmentParams { hflip: true, vflip: true, ..AugmentParams::IDENTITY };
        let out = augment_image(&img, &both).unwrap();
        for c in 0..3 {
            for i in 0..64 {
                for j in 0..64 {
                    assert_eq!(out.data()[(c * 64 + i) * 64 + j], img.data()[(c * 64 + 63 - i) * 64 + 63 - j]);
                }
            }
        }
    }

    #[test]
    fn quarter_turn_moves_pixels() {
        let mut img = Tensor::<f32>::zeros(&[1, 4, 4]).unwrap();
        img.data_mut()[1] = 1.0; // row 0, col 1
        let p = AugmentParams { angle_deg: 90.0, ..AugmentParams::IDENTITY };
        let out = augment_image(&img, &p).unwrap();
        // Counter-clockwise quarter turn sends (0, 1) to (2, 0).
        let idx = out.data().iter().position(|&v| v > 0.99).unwrap();
        assert_eq!(idx, 2 * 4);
    }

    #[test]
    fn invalid_ranges() {
        let cfg = AugmentationConfig { zoom: (1.2, 0.8), ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(AugmentationConfig::default().validate().is_ok());
    }
}
