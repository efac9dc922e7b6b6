//! Pixel-level helpers: opaque-pixel accounting and premultiplied bilinear
//! sampling.

use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

/// Integer rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Center in pixel-center coordinates (pixel `i` is centered at `i`).
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }
}

/// A pixel is opaque when its alpha is strictly above the threshold.
#[inline]
pub fn is_opaque(alpha: u8, threshold: u8) -> bool {
    alpha > threshold
}

pub fn count_opaque(img: &RgbaImage, threshold: u8) -> u64 {
    img.pixels().filter(|p| is_opaque(p[3], threshold)).count() as u64
}

/// Minimal box enclosing every opaque pixel, with the opaque count.
/// `None` when nothing is opaque.
pub fn opaque_extent(img: &RgbaImage, threshold: u8) -> Option<(BBox, u64)> {
    let (w, h) = img.dimensions();
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut count = 0u64;
    for y in 0..h {
        for x in 0..w {
            if is_opaque(img.get_pixel(x, y)[3], threshold) {
                count += 1;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (count > 0).then(|| {
        (
            BBox {
                x: x0,
                y: y0,
                w: x1 - x0 + 1,
                h: y1 - y0 + 1,
            },
            count,
        )
    })
}

/// RGBA image held as premultiplied `f32` in the `[0, 255]` range.
#[derive(Debug, Clone)]
pub struct Premultiplied {
    width: u32,
    height: u32,
    data: Vec<[f32; 4]>,
}

impl Premultiplied {
    pub fn from_rgba(img: &RgbaImage) -> Self {
        let data = img
            .pixels()
            .map(|p| {
                let a = p[3] as f32;
                let k = a / 255.0;
                [p[0] as f32 * k, p[1] as f32 * k, p[2] as f32 * k, a]
            })
            .collect();
        Self {
            width: img.width(),
            height: img.height(),
            data,
        }
    }

    #[inline]
    fn texel(&self, x: i64, y: i64) -> [f32; 4] {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            [0.0; 4]
        } else {
            self.data[(y as usize) * self.width as usize + x as usize]
        }
    }

    /// Bilinear sample at pixel-center coordinates; outside the raster is
    /// fully transparent.
    pub fn sample(&self, x: f64, y: f64) -> [f32; 4] {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let (xi, yi) = (x0 as i64, y0 as i64);
        let a = self.texel(xi, yi);
        let b = self.texel(xi + 1, yi);
        let c = self.texel(xi, yi + 1);
        let d = self.texel(xi + 1, yi + 1);
        let mut out = [0.0f32; 4];
        for k in 0..4 {
            let top = a[k] + (b[k] - a[k]) * fx;
            let bot = c[k] + (d[k] - c[k]) * fx;
            out[k] = top + (bot - top) * fy;
        }
        out
    }
}

/// Converts a premultiplied sample back to straight 8-bit RGBA.
pub fn unpremultiply(p: [f32; 4]) -> Rgba<u8> {
    let a = p[3].round().clamp(0.0, 255.0);
    if a == 0.0 {
        return Rgba([0, 0, 0, 0]);
    }
    let k = 255.0 / p[3];
    let c = |v: f32| (v * k).round().clamp(0.0, 255.0) as u8;
    Rgba([c(p[0]), c(p[1]), c(p[2]), a as u8])
}
