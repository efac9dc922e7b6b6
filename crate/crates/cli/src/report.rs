use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use si_forge_core::metrics::{Grid, Normalization};

use crate::error::{CliError, CliResult};
use crate::evaluate::{read_cellular, Cellular};
use crate::output::{report_json, require_file, write, Provenance};
use crate::render::{render_heatmap, Colormap, HeatmapMeta, HeatmapOptions, DEFAULT_CELL_PX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColormapArg {
    /// Diverging for delta reports, sequential otherwise.
    Auto,
    Sequential,
    Diverging,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Headerless CSV matrix, an `evaluate` grid/profile report, or spearman.json.
    #[arg(long)]
    pub input: PathBuf,
    /// PNG to write; the value range goes to the same path with `.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Pixels per matrix cell.
    #[arg(long, default_value_t = DEFAULT_CELL_PX)]
    pub cell: u32,
    #[arg(long, value_enum, default_value_t = ColormapArg::Auto)]
    pub colormap: ColormapArg,
    /// Fixed value range as LO,HI instead of the data range.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub range: Option<(f64, f64)>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("'{v}' is not a number"));
    Ok((p(lo)?, p(hi)?))
}

fn rows_of(grid: &Grid) -> Vec<Vec<Option<f64>>> {
    (0..grid.rows).map(|r| (0..grid.cols).map(|c| grid.get(r, c)).collect()).collect()
}

/// Matrix rows plus whether the values are differences.
fn load_matrix(path: &Path) -> CliResult<(Vec<Vec<Option<f64>>>, bool)> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        let f = fs::File::open(path).map_err(|e| CliError::data("io", format!("{}: {e}", path.display())))?;
        return Ok((rows_of(&Grid::read_csv(f)?), false));
    }
    let bytes = fs::read(path).map_err(|e| CliError::data("io", format!("{}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::data("report", format!("{}: {e}", path.display())))?;
    if let Some(m) = v.get("matrix") {
        let values: Vec<Vec<Option<f64>>> = serde_json::from_value(m["values"].clone())
            .map_err(|e| CliError::data("report", format!("{}: {e}", path.display())))?;
        return Ok((values, false));
    }
    Ok(match read_cellular(path)? {
        Cellular::Grid(g) => (rows_of(&g), g.normalization == Normalization::Delta),
        Cellular::Profile(p) => (vec![p.accuracy.clone()], p.normalization == Normalization::Delta),
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    image: String,
    #[serde(flatten)]
    meta: &'a HeatmapMeta,
}

pub fn run(a: ReportArgs) -> CliResult<()> {
    let input = require_file(&a.input)?;
    let (values, is_delta) = load_matrix(&input)?;
    let colormap = match a.colormap {
        ColormapArg::Auto if is_delta => Colormap::Diverging,
        ColormapArg::Auto | ColormapArg::Sequential => Colormap::Sequential,
        ColormapArg::Diverging => Colormap::Diverging,
    };
    let opts = HeatmapOptions {
        cell_px: a.cell,
        colormap,
        range: a.range,
    };
    let (img, meta) = render_heatmap(&values, &opts)?;
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| CliError::internal(format!("encoding PNG: {e}")))?;
    write(&a.out, &png)?;
    let prov = Provenance::new("report", None, &[&input])?;
    let sidecar = Sidecar {
        image: a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        meta: &meta,
    };
    write(&a.out.with_extension("json"), &report_json(&prov, &sidecar)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("-0.2,0.2").unwrap(), (-0.2, 0.2));
        assert!(parse_range("1").is_err());
        assert!(parse_range("a,1").is_err());
    }
}
