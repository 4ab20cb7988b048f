use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::data::{LandCoverClass, NUM_CLASSES};
use crate::error::{Error, Result};

use super::matrix::ClassificationMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub index: usize,
    pub class: String,
    pub colour: [u8; 3],
}

/// The built-in class colours, in class-index order.
pub fn default_palette() -> [[u8; 3]; NUM_CLASSES] {
    LandCoverClass::ALL.map(|c| c.colour())
}

pub fn legend(palette: &[[u8; 3]; NUM_CLASSES]) -> Vec<LegendEntry> {
    LandCoverClass::ALL
        .iter()
        .map(|c| LegendEntry { index: c.index(), class: c.display_name().to_string(), colour: palette[c.index()] })
        .collect()
}

/// Paints each cell as an `s × s` block of its class colour.
pub fn render_map(matrix: &ClassificationMatrix, palette: &[[u8; 3]; NUM_CLASSES], scale: u32) -> Result<(RgbImage, Vec<LegendEntry>)> {
    if scale < 1 {
        return Err(Error::Config("map scale must be at least 1".into()));
    }
    let (w, h) = (matrix.cols() as u32 * scale, matrix.rows() as u32 * scale);
    let img = RgbImage::from_fn(w, h, |x, y| {
        Rgb(palette[matrix.label((y / scale) as usize, (x / scale) as usize).index()])
    });
    Ok((img, legend(palette)))
}
