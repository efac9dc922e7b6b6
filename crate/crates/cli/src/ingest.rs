use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use si_forge_core::catalog::{
    ingest_backgrounds, ingest_foregrounds, validate_manifest, ClassMap, IngestErrorRecord, IngestOptions,
    DEFAULT_ALPHA_THRESHOLD,
};
use si_forge_core::compositor::DEFAULT_CANVAS_PX;
use si_forge_core::io::to_jsonl;
use si_forge_core::AssetManifest;

use crate::error::{CliError, CliResult};
use crate::output::{report_json, require_dir, require_file, write, Provenance};

pub const ASSETS_FILE: &str = "assets.jsonl";
pub const ERRORS_FILE: &str = "ingest_errors.jsonl";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of `<class>/<name>.png` RGBA cut-outs.
    #[arg(long)]
    pub foregrounds: PathBuf,
    /// CSV with `class_label,label_id` rows.
    #[arg(long)]
    pub class_map: PathBuf,
    /// Directory searched recursively for background PNGs.
    #[arg(long)]
    pub backgrounds: PathBuf,
    /// Backgrounds with a shorter side below this are skipped.
    #[arg(long, default_value_t = DEFAULT_CANVAS_PX)]
    pub min_side: u32,
    /// A pixel is opaque when its alpha exceeds this.
    #[arg(long, default_value_t = DEFAULT_ALPHA_THRESHOLD)]
    pub alpha_threshold: u8,
    /// Keep objects whose sidecar marks them occluded or truncated.
    #[arg(long)]
    pub include_flagged: bool,
    /// Output directory for assets.jsonl and ingest_errors.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    foregrounds: usize,
    backgrounds: usize,
    skipped: usize,
    findings: usize,
}

fn absolute(dir: &Path) -> CliResult<PathBuf> {
    require_dir(dir)?
        .canonicalize()
        .map_err(|e| CliError::data("io", format!("{}: {e}", dir.display())))
}

pub fn run(args: IngestArgs) -> CliResult<()> {
    let class_map_path = require_file(&args.class_map)?;
    // absolute raster paths keep the manifest usable from any directory
    let fg_dir = absolute(&args.foregrounds)?;
    let bg_dir = absolute(&args.backgrounds)?;
    let map = ClassMap::load(&class_map_path)?;
    let opts = IngestOptions {
        alpha_threshold: args.alpha_threshold,
        include_flagged: args.include_flagged,
    };
    let fgs = ingest_foregrounds(&fg_dir, &map, opts)?;
    let bgs = ingest_backgrounds(&bg_dir, args.min_side)?;
    let manifest = AssetManifest::new(fgs.assets, bgs.assets, args.alpha_threshold);
    let report = validate_manifest(&manifest);
    if !report.is_empty() {
        return Err(CliError::data(
            "assets",
            format!("ingested manifest failed validation: {:?}", report.findings),
        ));
    }
    let mut errors: Vec<IngestErrorRecord> = fgs.errors.into_iter().chain(bgs.errors).collect();
    errors.sort_by(|a, b| a.path.cmp(&b.path));

    write(&args.out.join(ASSETS_FILE), &manifest.to_jsonl())?;
    let err_bytes = to_jsonl(&errors).map_err(|e| CliError::internal(e.to_string()))?;
    write(&args.out.join(ERRORS_FILE), &err_bytes)?;
    let summary = Summary {
        foregrounds: manifest.foregrounds.len(),
        backgrounds: manifest.backgrounds.len(),
        skipped: errors.len(),
        findings: report.findings.len(),
    };
    let prov = Provenance::new("ingest", None, &[&class_map_path])?;
    let json = report_json(&prov, &summary)?;
    write(&args.out.join(PROVENANCE_FILE), &json)?;
    crate::output::emit(None, &json)
}
