//! Fixed-colormap PNG rendering of CSV matrices.
//!
//! Sequential maps use viridis, diverging maps a blue-white-red ramp that is
//! always symmetric about zero. Missing cells are neutral gray, a color
//! neither ramp produces.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MISSING_RGB: [u8; 3] = [128, 128, 128];
pub const DEFAULT_CELL_PX: u32 = 16;

const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

const BLUE_WHITE_RED: [[u8; 3]; 5] = [
    [33, 102, 172],
    [146, 197, 222],
    [247, 247, 247],
    [244, 165, 130],
    [178, 24, 43],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    /// viridis over [min, max]
    Sequential,
    /// blue-white-red over [−m, m], white at zero
    Diverging,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapOptions {
    pub cell_px: u32,
    pub colormap: Colormap,
    /// Fixed value range; defaults to the data range. For diverging maps the
    /// range is widened to be symmetric about zero.
    pub range: Option<(f64, f64)>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            cell_px: DEFAULT_CELL_PX,
            colormap: Colormap::Sequential,
            range: None,
        }
    }
}

/// Written next to the PNG so the colors can be read back as values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub rows: usize,
    pub cols: usize,
    pub cell_px: u32,
    pub colormap: Colormap,
    pub value_min: f64,
    pub value_max: f64,
    pub missing_rgb: [u8; 3],
    pub missing_cells: usize,
}

fn ramp(stops: &[[u8; 3]], t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    let f = t - i as f64;
    let mix = |k: usize| (stops[i][k] as f64 + (stops[i + 1][k] as f64 - stops[i][k] as f64) * f).round() as u8;
    Rgb([mix(0), mix(1), mix(2)])
}

pub fn color_for(value: f64, meta: &HeatmapMeta) -> Rgb<u8> {
    let span = meta.value_max - meta.value_min;
    let t = if span > 0.0 { (value - meta.value_min) / span } else { 0.5 };
    match meta.colormap {
        Colormap::Sequential => ramp(&VIRIDIS, t),
        Colormap::Diverging => ramp(&BLUE_WHITE_RED, t),
    }
}

pub fn render_heatmap(values: &[Vec<Option<f64>>], opts: &HeatmapOptions) -> CliResult<(RgbImage, HeatmapMeta)> {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(CliError::data("matrix", "cannot render an empty matrix"));
    }
    if values.iter().any(|r| r.len() != cols) {
        return Err(CliError::data("matrix", "matrix rows differ in length"));
    }
    if opts.cell_px == 0 {
        return Err(CliError::usage("cell size must be positive"));
    }
    let present: Vec<f64> = values.iter().flatten().flatten().copied().collect();
    if present.iter().any(|v| !v.is_finite()) {
        return Err(CliError::data("matrix", "matrix holds non-finite values"));
    }
    let (mut lo, mut hi) = match opts.range {
        Some((lo, hi)) if lo <= hi && lo.is_finite() && hi.is_finite() => (lo, hi),
        Some((lo, hi)) => return Err(CliError::usage(format!("bad value range [{lo}, {hi}]"))),
        None if present.is_empty() => (0.0, 1.0),
        None => (
            present.iter().copied().fold(f64::INFINITY, f64::min),
            present.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
    };
    if opts.colormap == Colormap::Diverging {
        let m = lo.abs().max(hi.abs());
        (lo, hi) = (-m, m);
    }
    let meta = HeatmapMeta {
        rows,
        cols,
        cell_px: opts.cell_px,
        colormap: opts.colormap,
        value_min: lo,
        value_max: hi,
        missing_rgb: MISSING_RGB,
        missing_cells: rows * cols - present.len(),
    };
    let c = opts.cell_px;
    let img = RgbImage::from_fn(cols as u32 * c, rows as u32 * c, |x, y| {
        match values[(y / c) as usize][(x / c) as usize] {
            Some(v) => color_for(v, &meta),
            None => Rgb(MISSING_RGB),
        }
    });
    Ok((img, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn distinct(img: &RgbImage) -> std::collections::BTreeSet<[u8; 3]> {
        img.pixels().map(|p| p.0).collect()
    }

    #[test]
    fn constant_grid_is_uniform() {
        let v = vec![vec![Some(1.0); 21]; 21];
        let (img, meta) = render_heatmap(&v, &HeatmapOptions { cell_px: 4, ..Default::default() }).unwrap();
        assert_eq!(img.dimensions(), (84, 84));
        assert_eq!(distinct(&img).len(), 1);
        assert_eq!((meta.value_min, meta.value_max), (1.0, 1.0));
    }

    #[test]
    fn one_missing_cell_is_one_gray_cell() {
        let mut v: Vec<Vec<Option<f64>>> = (0..5).map(|r| (0..5).map(|c| Some((r * 5 + c) as f64)).collect()).collect();
        v[2][3] = None;
        let (img, meta) = render_heatmap(&v, &HeatmapOptions { cell_px: 3, ..Default::default() }).unwrap();
        let gray = img.pixels().filter(|p| p.0 == MISSING_RGB).count();
        assert_eq!(gray, 9);
        assert_eq!(*img.get_pixel(3 * 3 + 1, 2 * 3 + 1), Rgb(MISSING_RGB));
        assert_eq!(meta.missing_cells, 1);
    }

    #[test]
    fn diverging_is_symmetric_about_zero() {
        let v = vec![vec![Some(-0.2), Some(0.0), Some(0.2), Some(0.1)]];
        let opts = HeatmapOptions {
            cell_px: 1,
            colormap: Colormap::Diverging,
            range: None,
        };
        let (img, meta) = render_heatmap(&v, &opts).unwrap();
        assert_eq!((meta.value_min, meta.value_max), (-0.2, 0.2));
        assert_eq!(img.get_pixel(1, 0).0, BLUE_WHITE_RED[2]);
        assert_eq!(img.get_pixel(0, 0).0, BLUE_WHITE_RED[0]);
        assert_eq!(img.get_pixel(2, 0).0, BLUE_WHITE_RED[4]);
        // an asymmetric data range still centers white on zero
        let (img, meta) = render_heatmap(&[vec![Some(0.0), Some(0.5), Some(-0.1)]], &opts).unwrap();
        assert_eq!((meta.value_min, meta.value_max), (-0.5, 0.5));
        assert_eq!(img.get_pixel(0, 0).0, BLUE_WHITE_RED[2]);
    }

    #[test]
    fn ramps_never_produce_the_missing_color() {
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            assert_ne!(ramp(&VIRIDIS, t).0, MISSING_RGB);
            assert_ne!(ramp(&BLUE_WHITE_RED, t).0, MISSING_RGB);
        }
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(render_heatmap(&[], &HeatmapOptions::default()).is_err());
        assert!(render_heatmap(&[vec![]], &HeatmapOptions::default()).is_err());
    }
}
