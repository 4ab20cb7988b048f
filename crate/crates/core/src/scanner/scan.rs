use image::RgbImage;
use rayon::prelude::*;

use crate::data::raster::{crop_to_chw, resize_bilinear};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::training::{Checkpoint, EVAL_BATCH};
use crate::TILE_SIZE;

use super::matrix::ClassificationMatrix;
use super::tiling::{TileRect, TilingPlan};

/// Cropped, 64×64, standardized CHW pixels of one tile.
pub fn tile_input(image: &RgbImage, tile: &TileRect, checkpoint: &Checkpoint) -> Vec<f32> {
    let chw = crop_to_chw(image, tile.x as u32, tile.y as u32, tile.width as u32, tile.height as u32);
    let mut px = resize_bilinear(&chw, 3, tile.height, tile.width, TILE_SIZE, TILE_SIZE);
    checkpoint.normalization.apply(&mut px);
    px
}

/// Classifies every tile of `plan` with the frozen model. Batches run in
/// parallel and write to their own cells, so the result does not depend on
/// scheduling.
pub fn scan(checkpoint: &Checkpoint, image: &RgbImage, plan: &TilingPlan, source: &str) -> Result<ClassificationMatrix> {
    let actual = (image.width() as usize, image.height() as usize);
    if actual != (plan.width, plan.height) {
        return Err(Error::PlanMismatch { expected: (plan.width, plan.height), actual });
    }
    let tiles: Vec<TileRect> = plan.tiles().collect();
    let plane = 3 * TILE_SIZE * TILE_SIZE;
    let cells: Vec<Vec<_>> = tiles
        .par_chunks(EVAL_BATCH)
        .map(|chunk| {
            let mut x = Vec::with_capacity(chunk.len() * plane);
            for t in chunk {
                x.extend(tile_input(image, t, checkpoint));
            }
            let x = Tensor::from_vec(&[chunk.len(), 3, TILE_SIZE, TILE_SIZE], x)?;
            checkpoint.predict(&x)
        })
        .collect::<Result<_>>()?;
    let (labels, confidences) = cells.into_iter().flatten().unzip();
    ClassificationMatrix::new(source, plan.rows(), plan.cols(), labels, confidences)?.with_plan(plan.clone())
}

/// Plans the tiling from the image size and scans it.
pub fn scan_image(checkpoint: &Checkpoint, image: &RgbImage, source: &str) -> Result<ClassificationMatrix> {
    let plan = super::plan_tiling(image.width() as usize, image.height() as usize)?;
    scan(checkpoint, image, &plan, source)
}
