use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use si_forge_core::sweep::{
    generate, preset_config, refilter, GenerateOptions, PresetKind, SampleCounts, IMAGES_DIR, MANIFEST_FILE,
};
use si_forge_core::{AssetManifest, DatasetManifest, SweepConfig};

use crate::error::{CliError, CliResult};
use crate::ingest::PROVENANCE_FILE;
use crate::output::{emit, report_json, require_file, write, Provenance};
use crate::resolve_seed;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Asset manifest written by `ingest`.
    #[arg(long)]
    pub assets: PathBuf,
    /// Factor sweep: size, location or rotation.
    #[arg(long)]
    pub preset: Option<PresetKind>,
    /// Keep samples with at least this share of the object on canvas.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Disable in-image filtering even if the preset or config sets it.
    #[arg(long, conflicts_with = "threshold")]
    pub no_threshold: bool,
    /// Base seed; falls back to the config file, then SI_FORGE_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output side length in pixels.
    #[arg(long)]
    pub canvas: Option<u32>,
    /// Backgrounds drawn per object for every factor combination.
    #[arg(long)]
    pub backgrounds_per_object: Option<usize>,
    /// JSON file with any of: preset, name, size_fractions, locations,
    /// rotations_deg, backgrounds_per_object, in_image_threshold, canvas_px, seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Dataset directory to create or update.
    #[arg(long)]
    pub out: PathBuf,
}

/// Config file overrides; every field is optional and flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateFile {
    pub preset: Option<PresetKind>,
    pub name: Option<String>,
    pub size_fractions: Option<Vec<f64>>,
    pub locations: Option<Vec<(f64, f64)>>,
    pub rotations_deg: Option<Vec<f64>>,
    pub backgrounds_per_object: Option<usize>,
    /// `null` disables filtering.
    #[serde(default, with = "double_option")]
    pub in_image_threshold: Option<Option<f64>>,
    pub canvas_px: Option<u32>,
    pub seed: Option<u64>,
}

mod double_option {
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
        Option::<f64>::deserialize(d).map(Some)
    }
}

/// Merges defaults, the preset, the config file and flags, in that order.
pub fn build_config(args: &GenerateArgs, file: &GenerateFile) -> CliResult<SweepConfig> {
    let preset = args
        .preset
        .or(file.preset)
        .ok_or_else(|| CliError::usage("--preset is required (size, location or rotation)"))?;
    let mut c = preset_config(preset);
    if let Some(n) = &file.name {
        c.name = n.clone();
    }
    if let Some(v) = &file.size_fractions {
        c.size_fractions = v.clone();
    }
    if let Some(v) = &file.locations {
        c.locations = v.clone();
    }
    if let Some(v) = &file.rotations_deg {
        c.rotations_deg = v.clone();
    }
    if let Some(t) = file.in_image_threshold {
        c.in_image_threshold = t;
    }
    if let Some(t) = args.threshold {
        c.in_image_threshold = Some(t);
    }
    if args.no_threshold {
        c.in_image_threshold = None;
    }
    if let Some(n) = args.backgrounds_per_object.or(file.backgrounds_per_object) {
        c.backgrounds_per_object = n;
    }
    if let Some(px) = args.canvas.or(file.canvas_px) {
        c.canvas_px = px;
    }
    c.seed = resolve_seed(args.seed, file.seed)?;
    c.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(c)
}

fn read_config(path: &Path) -> CliResult<GenerateFile> {
    let bytes = fs::read(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Deletes `<id>.png` files left in `images/` by an earlier run that the new
/// manifest does not list, so reruns leave the same tree.
fn prune_stale_images(out: &Path, manifest: &DatasetManifest) -> CliResult<()> {
    let keep: BTreeSet<String> = manifest.samples.iter().map(|s| format!("{}.png", s.image_id)).collect();
    let dir = out.join(IMAGES_DIR);
    let entries = fs::read_dir(&dir).map_err(|e| CliError::data("io", format!("{}: {e}", dir.display())))?;
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let ours = name.len() == 36 && name.ends_with(".png") && name[..32].bytes().all(|b| b.is_ascii_hexdigit());
        if ours && !keep.contains(&name) {
            fs::remove_file(entry.path()).map_err(|e| CliError::data("io", format!("{name}: {e}")))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary<'a> {
    dataset: &'a str,
    counts: SampleCounts,
    total_samples: usize,
}

pub fn run(args: GenerateArgs) -> CliResult<()> {
    let assets_path = require_file(&args.assets)?;
    let file = match &args.config {
        Some(p) => read_config(&require_file(p)?)?,
        None => GenerateFile::default(),
    };
    let config = build_config(&args, &file)?;
    let assets = AssetManifest::load(&assets_path)?;
    if args.jobs == Some(0) {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let manifest = generate(&assets, &config, &args.out, GenerateOptions { jobs: args.jobs })?;
    prune_stale_images(&args.out, &manifest)?;

    let mut inputs: Vec<&Path> = vec![&assets_path];
    if let Some(p) = &args.config {
        inputs.push(p);
    }
    let prov = Provenance::new("generate", Some(config.seed), &inputs)?;
    let summary = GenerateSummary {
        dataset: &config.name,
        counts: manifest.counts,
        total_samples: config.total_samples(assets.foregrounds.len()),
    };
    let json = report_json(&prov, &summary)?;
    write(&args.out.join(PROVENANCE_FILE), &json)?;
    emit(None, &json)
}

#[derive(Debug, Args)]
pub struct RefilterArgs {
    /// manifest.jsonl of a generated dataset, or its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    /// Output directory; defaults to `<dataset>/filtered_<threshold>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

pub fn run_refilter(args: RefilterArgs) -> CliResult<()> {
    let path = require_file(&manifest_path(&args.manifest))?;
    let source = DatasetManifest::load(&path)?;
    let mut filtered = refilter(&source, args.threshold)?;
    let dataset_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| dataset_dir.join(format!("filtered_{}", args.threshold)));
    // images stay where they are; point the records at them from `out`
    let default_out = args.out.is_none();
    let abs_dataset = dataset_dir
        .canonicalize()
        .map_err(|e| CliError::data("io", format!("{}: {e}", dataset_dir.display())))?;
    for s in &mut filtered.samples {
        s.image_path = if default_out {
            format!("../{}", s.image_path)
        } else {
            abs_dataset.join(&s.image_path).display().to_string()
        };
    }
    if out.canonicalize().ok().as_deref() == Some(abs_dataset.as_path()) {
        return Err(CliError::usage("refilter would overwrite its input; choose another --out"));
    }
    filtered.save(&out)?;
    let prov = Provenance::new("refilter", Some(source.config.seed), &[&path])?;
    let summary = GenerateSummary {
        dataset: &filtered.config.name,
        counts: filtered.counts,
        total_samples: source.counts.generated + source.counts.filtered_out + source.counts.failed,
    };
    let json = report_json(&prov, &summary)?;
    write(&out.join(PROVENANCE_FILE), &json)?;
    emit(None, &json)
}
