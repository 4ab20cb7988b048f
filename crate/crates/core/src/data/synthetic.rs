//! Procedural EuroSAT-like tiles, for tests and demos when no real imagery
//! is at hand. Each class has its own colour palette and texture; tiles of
//! the same class vary in phase, orientation, brightness and noise.

use std::fs;
use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::TILE_SIZE;

use super::classes::LandCoverClass;
use super::dataset::Sample;
use super::raster::{tensor_to_rgb, unit_to_byte};

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Smooth value noise on a coarse lattice, in `[0, 1]`.
struct ValueNoise {
    cells: usize,
    grid: Vec<f64>,
}

impl ValueNoise {
    fn new(cells: usize, rng: &mut Rng) -> Self {
        let grid = (0..(cells + 1) * (cells + 1)).map(|_| rng.uniform(0.0, 1.0)).collect();
        Self { cells, grid }
    }

    fn at(&self, y: f64, x: f64) -> f64 {
        let s = self.cells as f64 / TILE_SIZE as f64;
        let (gy, gx) = (y * s, x * s);
        let (y0, x0) = (gy.floor() as usize, gx.floor() as usize);
        let (fy, fx) = (gy - y0 as f64, gx - x0 as f64);
        let (fy, fx) = (fy * fy * (3.0 - 2.0 * fy), fx * fx * (3.0 - 2.0 * fx));
        let n = self.cells + 1;
        let g = |r: usize, c: usize| self.grid[r.min(self.cells) * n + c.min(self.cells)];
        let top = g(y0, x0) * (1.0 - fx) + g(y0, x0 + 1) * fx;
        let bottom = g(y0 + 1, x0) * (1.0 - fx) + g(y0 + 1, x0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Renders one tile of `class`; pixel values are multiples of 1/255.
pub fn synthetic_tile(class: LandCoverClass, rng: &mut Rng) -> Tensor<f32> {
    use LandCoverClass::*;
    let n = TILE_SIZE;
    let theta = rng.uniform(0.0, std::f64::consts::PI);
    let (st, ct) = theta.sin_cos();
    let phase = rng.uniform(0.0, 1.0);
    let bright = rng.uniform(0.9, 1.1);
    let grain = rng.uniform(0.02, 0.05);
    let coarse = ValueNoise::new(4, rng);
    let fine = ValueNoise::new(16, rng);
    let offset = rng.uniform(-12.0, 12.0);
    let period = rng.uniform(7.0, 11.0);

    let mut data = vec![0.0f32; 3 * n * n];
    for i in 0..n {
        for j in 0..n {
            let (y, x) = (i as f64, j as f64);
            let (cy, cx) = (y - 31.5, x - 31.5);
            let along = cx * ct + cy * st;
            let across = -cx * st + cy * ct;
            let rgb = match class {
                AnnualCrop => {
                    let band = ((along / period + phase).fract() < 0.5) as u8 as f64;
                    mix([0.55, 0.45, 0.25], [0.75, 0.65, 0.35], band)
                }
                Forest => mix([0.05, 0.2, 0.08], [0.12, 0.3, 0.12], fine.at(y, x)),
                HerbaceousVegetation => {
                    let t = 0.6 * coarse.at(y, x) + 0.4 * fine.at(y, x);
                    mix([0.35, 0.45, 0.2], [0.55, 0.55, 0.3], t)
                }
                Highway => {
                    let d = (across - offset).abs();
                    let base = mix([0.3, 0.42, 0.25], [0.4, 0.5, 0.3], coarse.at(y, x));
                    if d < 4.0 {
                        [0.55, 0.55, 0.55]
                    } else if d < 5.5 {
                        [0.75, 0.75, 0.72]
                    } else {
                        base
                    }
                }
                Industrial => {
                    let (by, bx) = (((y + phase * 16.0) / 16.0).floor(), ((x + phase * 16.0) / 16.0).floor());
                    let block = ((by * 7.0 + bx * 13.0).sin() * 0.5 + 0.5).abs();
                    let edge = ((y + phase * 16.0) % 16.0 < 2.0) || ((x + phase * 16.0) % 16.0 < 2.0);
                    if edge {
                        [0.3, 0.3, 0.3]
                    } else {
                        mix([0.55, 0.55, 0.6], [0.85, 0.85, 0.85], block)
                    }
                }
                Pasture => mix([0.45, 0.6, 0.3], [0.55, 0.7, 0.35], coarse.at(y, x)),
                PermanentCrop => {
                    let a = (along / 6.0 + phase).fract();
                    let b = (across / 6.0 + phase).fract();
                    let dot = (a - 0.5).hypot(b - 0.5) < 0.28;
                    if dot {
                        [0.2, 0.35, 0.1]
                    } else {
                        [0.6, 0.5, 0.3]
                    }
                }
                Residential => {
                    let a = ((x + phase * 8.0) / 8.0).fract();
                    let b = ((y + phase * 8.0) / 8.0).fract();
                    let roof = a > 0.2 && a < 0.7 && b > 0.2 && b < 0.7;
                    if roof {
                        mix([0.7, 0.35, 0.3], [0.85, 0.5, 0.4], fine.at(y, x))
                    } else {
                        mix([0.4, 0.45, 0.35], [0.55, 0.55, 0.5], fine.at(y, x))
                    }
                }
                River => {
                    let centre = offset + 8.0 * (along / 20.0 + phase * 6.28).sin();
                    let d = (across - centre).abs();
                    let land = mix([0.3, 0.45, 0.2], [0.45, 0.55, 0.3], coarse.at(y, x));
                    if d < 6.0 {
                        [0.1, 0.25, 0.45]
                    } else {
                        land
                    }
                }
                SeaLake => mix([0.02, 0.12, 0.3], [0.05, 0.18, 0.38], coarse.at(y, x)),
            };
            for c in 0..3 {
                let v = rgb[c] * bright + rng.gaussian(0.0, grain);
                data[(c * n + i) * n + j] = unit_to_byte(v as f32) as f32 / 255.0;
            }
        }
    }
    Tensor::from_vec(&[3, n, n], data).expect("tile shape")
}

/// `per_class` tiles for each class in `classes`, in class-major order.
pub fn synthetic_dataset(per_class: usize, classes: &[LandCoverClass], seed: u64) -> Vec<Sample> {
    let mut out = Vec::with_capacity(per_class * classes.len());
    for &class in classes {
        for k in 0..per_class {
            let mut rng = Rng::derive(seed, (class.index() * 1_000_000 + k) as u64);
            let image = synthetic_tile(class, &mut rng);
            let source = format!("synthetic/{}/{}_{k}.png", class.folder_name(), class.folder_name());
            out.push(Sample::new(image, class, source).expect("tile shape"));
        }
    }
    out
}

/// Writes a dataset as `<root>/<ClassFolder>/<ClassFolder>_<k>.png`.
pub fn write_synthetic_dataset(
    root: impl AsRef<Path>,
    per_class: usize,
    classes: &[LandCoverClass],
    seed: u64,
) -> Result<usize> {
    let root = root.as_ref();
    let samples = synthetic_dataset(per_class, classes, seed);
    for class in classes {
        let dir = root.join(class.folder_name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for (k, s) in samples.iter().enumerate() {
        let name = format!("{}_{}.png", s.label.folder_name(), k % per_class.max(1));
        let path = root.join(s.label.folder_name()).join(name);
        tensor_to_rgb(&s.image).save(&path).map_err(|e| Error::Image { path: path.clone(), source: e })?;
    }
    Ok(samples.len())
}

/// Places 64×64 tiles row-major into a `rows × cols` mosaic.
pub fn stitch(tiles: &[&Tensor<f32>], rows: usize, cols: usize) -> Result<RgbImage> {
    if tiles.len() != rows * cols {
        return Err(Error::Config(format!("stitch needs {} tiles, got {}", rows * cols, tiles.len())));
    }
    let n = TILE_SIZE as u32;
    let mut img = RgbImage::new(cols as u32 * n, rows as u32 * n);
    for (k, t) in tiles.iter().enumerate() {
        if t.shape() != [3, TILE_SIZE, TILE_SIZE] {
            return Err(Error::shape(format!("stitch tile {k} has shape {:?}", t.shape())));
        }
        let tile = tensor_to_rgb(t);
        let (r, c) = ((k / cols) as u32, (k % cols) as u32);
        image::imageops::replace(&mut img, &tile, (c * n) as i64, (r * n) as i64);
    }
    Ok(img)
}
