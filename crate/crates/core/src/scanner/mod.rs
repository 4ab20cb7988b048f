//! Sliding-window scanning of large images and land-cover map rendering.

mod matrix;
mod render;
mod scan;
mod tiling;

pub use matrix::{ClassificationMatrix, MATRIX_FORMAT_VERSION};
pub use render::{default_palette, legend, render_map, LegendEntry};
pub use scan::{scan, scan_image, tile_input};
pub use tiling::{axis_extents, plan_tiling, TileRect, TilingPlan};
