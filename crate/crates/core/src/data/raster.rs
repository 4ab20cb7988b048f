//! Conversions between 8-bit RGB rasters and CHW float tensors, plus bilinear sampling.

use image::RgbImage;

use crate::error::Result;
use crate::tensor::Tensor;

#[inline]
pub fn byte_to_unit(v: u8) -> f32 {
    v as f32 / 255.0
}

#[inline]
pub fn unit_to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Crops `[x0, x0+w) × [y0, y0+h)` into a CHW buffer scaled to `[0, 1]`.
pub fn crop_to_chw(img: &RgbImage, x0: u32, y0: u32, w: u32, h: u32) -> Vec<f32> {
    let plane = (w * h) as usize;
    let mut out = vec![0.0f32; 3 * plane];
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x0 + x, y0 + y).0;
            let i = (y * w + x) as usize;
            for c in 0..3 {
                out[c * plane + i] = byte_to_unit(p[c]);
            }
        }
    }
    out
}

/// Whole image as a `[3, H, W]` tensor in `[0, 1]`.
pub fn rgb_to_tensor(img: &RgbImage) -> Result<Tensor<f32>> {
    let (w, h) = img.dimensions();
    Tensor::from_vec(&[3, h as usize, w as usize], crop_to_chw(img, 0, 0, w, h))
}

/// `[3, H, W]` tensor in `[0, 1]` back to 8-bit RGB (rounded).
pub fn tensor_to_rgb(t: &Tensor<f32>) -> RgbImage {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let plane = h * w;
    let d = t.data();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        image::Rgb([unit_to_byte(d[i]), unit_to_byte(d[plane + i]), unit_to_byte(d[2 * plane + i])])
    })
}

/// Bilinear sample of one `h × w` plane at fractional `(y, x)`, clamping to the
/// edge. The result is a convex combination of at most four pixels.
#[inline]
pub fn sample_bilinear(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f32 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |r: usize, c: usize| plane[r * w + c] as f64;
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    (top * (1.0 - fy) + bottom * fy) as f32
}

/// Bilinear resize of a CHW buffer using pixel-centre alignment.
pub fn resize_bilinear(src: &[f32], c: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f32> {
    if (h, w) == (oh, ow) {
        return src.to_vec();
    }
    let (sy, sx) = (h as f64 / oh as f64, w as f64 / ow as f64);
    let mut out = vec![0.0f32; c * oh * ow];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for i in 0..oh {
            let y = (i as f64 + 0.5) * sy - 0.5;
            for j in 0..ow {
                let x = (j as f64 + 0.5) * sx - 0.5;
                out[(ch * oh + i) * ow + j] = sample_bilinear(plane, h, w, y, x);
            }
        }
    }
    out
}
