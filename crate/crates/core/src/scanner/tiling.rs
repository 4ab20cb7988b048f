use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TILE_SIZE;

/// Non-overlapping tiles covering an image exactly.
///
/// Each axis gets `n = ⌊dim/64⌋` tiles. The remainder `r = dim − 64n` widens
/// the last `min(r, n)` tiles by one pixel each; anything left over when
/// `r > n` goes to the final tile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub width: usize,
    pub height: usize,
    /// `cols + 1` column boundaries, from 0 to `width`.
    pub x_offsets: Vec<usize>,
    /// `rows + 1` row boundaries, from 0 to `height`.
    pub y_offsets: Vec<usize>,
}

/// Tile extents along one axis of length `dim`.
pub fn axis_extents(dim: usize) -> Vec<usize> {
    let n = dim / TILE_SIZE;
    let r = dim - n * TILE_SIZE;
    let widened = r.min(n);
    let mut ext = vec![TILE_SIZE; n];
    for e in &mut ext[n - widened..] {
        *e += 1;
    }
    if let Some(last) = ext.last_mut() {
        *last += r - widened;
    }
    ext
}

fn offsets(ext: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(ext.len() + 1);
    out.push(0);
    let mut acc = 0;
    for e in ext {
        acc += e;
        out.push(acc);
    }
    out
}

pub fn plan_tiling(width: usize, height: usize) -> Result<TilingPlan> {
    if width < TILE_SIZE || height < TILE_SIZE {
        return Err(Error::ImageTooSmall { width, height, min: TILE_SIZE });
    }
    Ok(TilingPlan {
        width,
        height,
        x_offsets: offsets(&axis_extents(width)),
        y_offsets: offsets(&axis_extents(height)),
    })
}

/// Pixel rectangle of one tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub row: usize,
    pub col: usize,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl TilingPlan {
    pub fn rows(&self) -> usize {
        self.y_offsets.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.x_offsets.len() - 1
    }

    pub fn col_extents(&self) -> Vec<usize> {
        self.x_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn row_extents(&self) -> Vec<usize> {
        self.y_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn tile(&self, row: usize, col: usize) -> TileRect {
        TileRect {
            row,
            col,
            x: self.x_offsets[col],
            y: self.y_offsets[row],
            width: self.x_offsets[col + 1] - self.x_offsets[col],
            height: self.y_offsets[row + 1] - self.y_offsets[row],
        }
    }

    /// All tiles in row-major order.
    pub fn tiles(&self) -> impl Iterator<Item = TileRect> + '_ {
        (0..self.rows()).flat_map(move |r| (0..self.cols()).map(move |c| self.tile(r, c)))
    }
}
