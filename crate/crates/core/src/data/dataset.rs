//! EuroSAT-style directory ingestion: `<root>/<ClassName>/<file>`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::TILE_SIZE;

use super::classes::LandCoverClass;
use super::raster::rgb_to_tensor;

/// One labelled 64×64 RGB tile. Pixels are stored scaled to `[0, 1]`;
/// channel standardization happens when batches are assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub label: LandCoverClass,
    pub source: PathBuf,
}

impl Sample {
    pub fn new(image: Tensor<f32>, label: LandCoverClass, source: impl Into<PathBuf>) -> Result<Self> {
        if image.shape() != [3, TILE_SIZE, TILE_SIZE] {
            return Err(Error::shape(format!("sample image must be [3, 64, 64], got {:?}", image.shape())));
        }
        Ok(Self { image, label, source: source.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub samples: Vec<Sample>,
    pub skipped: Vec<SkippedFile>,
    /// Class directories that exist but yielded no samples.
    pub empty_classes: Vec<LandCoverClass>,
}

impl LoadedDataset {
    pub fn class_counts(&self) -> [usize; 10] {
        let mut counts = [0; 10];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn decode_tile(path: &Path) -> std::result::Result<Tensor<f32>, String> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| e.to_string())?
        .with_guessed_format()
        .map_err(|e| e.to_string())?;
    let img = reader.decode().map_err(|e| e.to_string())?.to_rgb8();
    if img.dimensions() != (TILE_SIZE as u32, TILE_SIZE as u32) {
        let (w, h) = img.dimensions();
        return Err(format!("image is {w}x{h}, expected 64x64"));
    }
    rgb_to_tensor(&img).map_err(|e| e.to_string())
}

/// Reads every class directory under `root`.
///
/// Unknown directory names abort the load. Files that cannot be decoded (or
/// are not 64×64) are collected in [`LoadedDataset::skipped`] instead.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<LoadedDataset> {
    let root = root.as_ref();
    let mut files = Vec::new();
    let mut skipped = Vec::new();
    let mut class_dirs = Vec::new();
    for entry in sorted_entries(root)? {
        if !entry.is_dir() {
            skipped.push(SkippedFile { path: entry, reason: "not inside a class directory".into() });
            continue;
        }
        let name = entry.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let class = LandCoverClass::from_dir_name(&name)?;
        class_dirs.push(class);
        for file in sorted_entries(&entry)? {
            if file.is_file() {
                files.push((file, class));
            }
        }
    }
    let decoded: Vec<(PathBuf, LandCoverClass, std::result::Result<Tensor<f32>, String>)> = files
        .into_par_iter()
        .map(|(path, class)| {
            let img = decode_tile(&path);
            (path, class, img)
        })
        .collect();
    let mut samples = Vec::with_capacity(decoded.len());
    for (path, label, img) in decoded {
        match img {
            Ok(image) => samples.push(Sample { image, label, source: path }),
            Err(reason) => skipped.push(SkippedFile { path, reason }),
        }
    }
    let empty_classes = class_dirs.into_iter().filter(|c| !samples.iter().any(|s| s.label == *c)).collect();
    Ok(LoadedDataset { samples, skipped, empty_classes })
}

/// Plain-text skip report: one path per line.
pub fn write_skip_report(path: impl AsRef<Path>, skipped: &[SkippedFile]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for s in skipped {
        writeln!(f, "{}", s.path.display()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
