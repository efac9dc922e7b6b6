//! Factor-of-variation sweeps: presets, background assignment, rendering and
//! the dataset manifest.
//!
//! On disk a dataset is
//!
//! ```text
//! DIR/images/<image_id>.png
//! DIR/manifest.jsonl   one SampleRecord per line, sorted by image_id
//! DIR/config.json      frozen SweepConfig, counts and per-sample failures
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{AssetIndex, AssetManifest, ForegroundAsset};
use crate::compositor::{load_background, CompositeError, ObjectCutout, TransformedObject, MIN_CANVAS_PX};
use crate::io::{read_jsonl, to_jsonl, write_atomic, JsonlError};
use crate::seeding::keyed_stream;

pub const DEFAULT_SEED: u64 = 20_200_617;
pub const LOCATION_STEPS: u32 = 20;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("need {needed} backgrounds per object but only {available} are available")]
    NotEnoughBackgrounds { needed: usize, available: usize },
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    Size,
    Location,
    Rotation,
}

impl FromStr for PresetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(Self::Size),
            "location" => Ok(Self::Location),
            "rotation" => Ok(Self::Rotation),
            other => Err(format!("unknown preset '{other}' (expected size, location or rotation)")),
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Size => "size",
            Self::Location => "location",
            Self::Rotation => "rotation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub name: String,
    pub size_fractions: Vec<f64>,
    pub locations: Vec<(f64, f64)>,
    pub rotations_deg: Vec<f64>,
    pub backgrounds_per_object: usize,
    /// Keep a sample only if at least this share of the object is on canvas.
    pub in_image_threshold: Option<f64>,
    pub canvas_px: u32,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidConfig(m));
        if self.size_fractions.is_empty() || self.locations.is_empty() || self.rotations_deg.is_empty() {
            return bad("every factor list must be non-empty".into());
        }
        if let Some(s) = self.size_fractions.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return bad(format!("size fraction {s} not in (0, 1]"));
        }
        if let Some(l) = self
            .locations
            .iter()
            .find(|(x, y)| !(0.0..=1.0).contains(x) || !(0.0..=1.0).contains(y))
        {
            return bad(format!("location {l:?} outside [0, 1]²"));
        }
        if self.rotations_deg.iter().any(|r| !r.is_finite()) {
            return bad("rotation angles must be finite".into());
        }
        if has_duplicates(self.size_fractions.iter().map(|v| v.to_bits()))
            || has_duplicates(self.rotations_deg.iter().map(|v| v.to_bits()))
            || has_duplicates(self.locations.iter().map(|(x, y)| (x.to_bits(), y.to_bits())))
        {
            return bad("factor lists must not repeat values".into());
        }
        if self.backgrounds_per_object == 0 {
            return bad("backgrounds_per_object must be positive".into());
        }
        if let Some(t) = self.in_image_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(SweepError::BadThreshold(t));
            }
        }
        if self.canvas_px < MIN_CANVAS_PX {
            return bad(format!("canvas_px {} below {MIN_CANVAS_PX}", self.canvas_px));
        }
        Ok(())
    }

    /// Factor tuples per (object, background) pair.
    pub fn factor_combinations(&self) -> usize {
        self.size_fractions.len() * self.locations.len() * self.rotations_deg.len()
    }

    /// Samples the cross product produces before filtering.
    pub fn total_samples(&self, objects: usize) -> usize {
        objects * self.backgrounds_per_object * self.factor_combinations()
    }
}

fn has_duplicates<T: Ord>(it: impl Iterator<Item = T>) -> bool {
    let mut v: Vec<T> = it.collect();
    let n = v.len();
    v.sort();
    v.dedup();
    v.len() != n
}

/// The three standard sweeps.
///
/// - size: 1%..100% in 1% steps, centered, upright, ≥ 95% in image
/// - location: 21 × 21 grid including both edges, 20% size, upright, unfiltered
/// - rotation: 1°..341° in 20° steps × sizes {20, 50, 80, 100}%, centered,
///   ≥ 95% in image
pub fn preset_config(kind: PresetKind) -> SweepConfig {
    let base = SweepConfig {
        name: kind.to_string(),
        size_fractions: vec![0.20],
        locations: vec![(0.5, 0.5)],
        rotations_deg: vec![0.0],
        backgrounds_per_object: 2,
        in_image_threshold: Some(0.95),
        canvas_px: crate::compositor::DEFAULT_CANVAS_PX,
        seed: DEFAULT_SEED,
    };
    match kind {
        PresetKind::Size => SweepConfig {
            size_fractions: (1..=100).map(|i| i as f64 / 100.0).collect(),
            ..base
        },
        PresetKind::Location => {
            let steps = LOCATION_STEPS;
            let axis: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
            SweepConfig {
                locations: axis.iter().flat_map(|&y| axis.iter().map(move |&x| (x, y))).collect(),
                in_image_threshold: None,
                ..base
            }
        }
        PresetKind::Rotation => SweepConfig {
            size_fractions: vec![0.20, 0.50, 0.80, 1.00],
            rotations_deg: (0..18).map(|i| (1 + 20 * i) as f64).collect(),
            ..base
        },
    }
}

/// Draws `n` distinct backgrounds per object without replacement.
///
/// Each object's draw uses its own stream keyed by `(seed, object_id)` over
/// the id-sorted background list, so the result does not depend on object
/// order, list order or thread count.
pub fn assign_backgrounds(
    object_ids: &[&str],
    background_ids: &[&str],
    n: usize,
    seed: u64,
) -> Result<BTreeMap<String, Vec<String>>, SweepError> {
    let mut pool: Vec<&str> = background_ids.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if pool.len() < n {
        return Err(SweepError::NotEnoughBackgrounds {
            needed: n,
            available: pool.len(),
        });
    }
    Ok(object_ids
        .iter()
        .map(|&obj| {
            let mut rng = keyed_stream(seed, "assign_backgrounds", obj);
            let mut order = pool.clone();
            // partial Fisher-Yates
            for i in 0..n {
                let j = rng.random_range(i..order.len());
                order.swap(i, j);
            }
            (obj.to_string(), order[..n].iter().map(|s| s.to_string()).collect())
        })
        .collect())
}

/// Hex digest of the sample's defining tuple.
pub fn image_id(foreground_id: &str, background_id: &str, size: f64, fx: f64, fy: f64, rotation_deg: f64) -> String {
    let mut h = Sha256::new();
    for s in [foreground_id, background_id] {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    }
    for v in [size, fx, fy, rotation_deg] {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub image_id: String,
    pub foreground_id: String,
    pub background_id: String,
    pub class_label: String,
    pub target_label_ids: Vec<u32>,
    pub size_fraction: f64,
    pub fx: f64,
    pub fy: f64,
    pub rotation_deg: f64,
    pub in_image_fraction: f64,
    pub image_path: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    /// Samples kept in the manifest.
    pub generated: usize,
    /// Rendered but below the in-image threshold.
    pub filtered_out: usize,
    /// Could not be rendered (see `failures`).
    #[serde(default)]
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub image_id: String,
    pub foreground_id: String,
    pub background_id: String,
    pub message: String,
}

/// Contents of `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub config: SweepConfig,
    pub counts: SampleCounts,
    #[serde(default)]
    pub failures: Vec<SampleFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub config: SweepConfig,
    pub samples: Vec<SampleRecord>,
    pub counts: SampleCounts,
    pub failures: Vec<SampleFailure>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const IMAGES_DIR: &str = "images";

impl DatasetManifest {
    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            config: self.config.clone(),
            counts: self.counts,
            failures: self.failures.clone(),
        }
    }

    pub fn samples_jsonl(&self) -> Vec<u8> {
        let mut sorted: Vec<&SampleRecord> = self.samples.iter().collect();
        sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        to_jsonl(sorted).expect("sample records always serialize")
    }

    pub fn summary_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(&self.summary()).expect("summary always serializes");
        v.push(b'\n');
        v
    }

    /// Writes `manifest.jsonl` and `config.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), SweepError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let m = dir.join(MANIFEST_FILE);
        write_atomic(&m, &self.samples_jsonl()).map_err(io_err(&m))?;
        let c = dir.join(CONFIG_FILE);
        write_atomic(&c, &self.summary_json()).map_err(io_err(&c))
    }

    /// Loads from a `manifest.jsonl` path, reading `config.json` beside it.
    pub fn load(manifest_path: &Path) -> Result<Self, SweepError> {
        let f = fs::File::open(manifest_path).map_err(io_err(manifest_path))?;
        let samples: Vec<SampleRecord> = read_jsonl(BufReader::new(f)).map_err(|e| match e {
            JsonlError::Io(source) => SweepError::Io {
                path: manifest_path.to_path_buf(),
                source,
            },
            other => SweepError::Format {
                path: manifest_path.to_path_buf(),
                message: other.to_string(),
            },
        })?;
        let cfg_path = manifest_path.with_file_name(CONFIG_FILE);
        let bytes = fs::read(&cfg_path).map_err(io_err(&cfg_path))?;
        let summary: DatasetSummary = serde_json::from_slice(&bytes).map_err(|e| SweepError::Format {
            path: cfg_path.clone(),
            message: e.to_string(),
        })?;
        if summary.counts.generated != samples.len() {
            return Err(SweepError::Manifest(format!(
                "config.json records {} samples but manifest has {}",
                summary.counts.generated,
                samples.len()
            )));
        }
        Ok(Self {
            config: summary.config,
            samples,
            counts: summary.counts,
            failures: summary.failures,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateOptions {
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

enum Outcome {
    Kept(SampleRecord),
    Filtered,
    Failed(SampleFailure),
}

struct ObjectGroup<'a> {
    fg: &'a ForegroundAsset,
    size: f64,
    rotation: f64,
}

/// Renders the full cross product and writes the dataset to `out_dir`.
///
/// Each (object, size, rotation) is transformed once and then placed at every
/// location on every assigned background. Filtered samples are rendered and
/// measured like any other; only their PNGs are skipped.
pub fn generate(
    assets: &AssetManifest,
    config: &SweepConfig,
    out_dir: &Path,
    options: GenerateOptions,
) -> Result<DatasetManifest, SweepError> {
    config.validate()?;
    let images_dir = out_dir.join(IMAGES_DIR);
    fs::create_dir_all(&images_dir).map_err(io_err(&images_dir))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = options.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
    pool.install(|| generate_inner(assets, config, &images_dir))
}

fn generate_inner(assets: &AssetManifest, config: &SweepConfig, images_dir: &Path) -> Result<DatasetManifest, SweepError> {
    let index = AssetIndex::new(assets);
    let threshold = assets.mask_alpha_threshold;
    let canvas = config.canvas_px;
    let mut fgs: Vec<&ForegroundAsset> = assets.foregrounds.iter().collect();
    fgs.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
    let object_ids: Vec<&str> = fgs.iter().map(|f| f.asset_id.as_str()).collect();
    let background_ids: Vec<&str> = assets.backgrounds.iter().map(|b| b.asset_id.as_str()).collect();
    let assignment = assign_backgrounds(&object_ids, &background_ids, config.backgrounds_per_object, config.seed)?;

    let mut used_bgs: Vec<&str> = assignment.values().flatten().map(String::as_str).collect();
    used_bgs.sort_unstable();
    used_bgs.dedup();
    let backgrounds: HashMap<&str, Result<RgbImage, CompositeError>> = used_bgs
        .par_iter()
        .map(|&id| (id, load_background(index.backgrounds[id], canvas)))
        .collect();
    let cutouts: HashMap<&str, Result<ObjectCutout, CompositeError>> = fgs
        .par_iter()
        .map(|f| (f.asset_id.as_str(), ObjectCutout::load(f, threshold)))
        .collect();

    let groups: Vec<ObjectGroup> = fgs
        .iter()
        .flat_map(|&fg| {
            config.size_fractions.iter().flat_map(move |&size| {
                config
                    .rotations_deg
                    .iter()
                    .map(move |&rotation| ObjectGroup { fg, size, rotation })
            })
        })
        .collect();

    let outcomes: Vec<Result<Outcome, SweepError>> = groups
        .par_iter()
        .flat_map_iter(|g| {
            let transformed = cutouts[g.fg.asset_id.as_str()]
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|c| crate::compositor::transform_object(c, g.size, g.rotation, canvas, threshold));
            let bg_ids = &assignment[&g.fg.asset_id];
            let mut out = Vec::with_capacity(bg_ids.len() * config.locations.len());
            for bg_id in bg_ids {
                for &(fx, fy) in &config.locations {
                    out.push(render_one(
                        g,
                        &transformed,
                        bg_id,
                        &backgrounds[bg_id.as_str()],
                        (fx, fy),
                        config,
                        images_dir,
                    ));
                }
            }
            out
        })
        .collect();

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let mut counts = SampleCounts::default();
    for o in outcomes {
        match o? {
            Outcome::Kept(rec) => {
                counts.generated += 1;
                samples.push(rec);
            }
            Outcome::Filtered => counts.filtered_out += 1,
            Outcome::Failed(f) => {
                counts.failed += 1;
                failures.push(f);
            }
        }
    }
    samples.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    failures.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let manifest = DatasetManifest {
        config: config.clone(),
        samples,
        counts,
        failures,
    };
    let out_dir = images_dir.parent().unwrap_or(Path::new("."));
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn render_one(
    g: &ObjectGroup,
    transformed: &Result<TransformedObject, CompositeError>,
    bg_id: &str,
    background: &Result<RgbImage, CompositeError>,
    location: (f64, f64),
    config: &SweepConfig,
    images_dir: &Path,
) -> Result<Outcome, SweepError> {
    let id = image_id(&g.fg.asset_id, bg_id, g.size, location.0, location.1, g.rotation);
    let fail = |e: &CompositeError| {
        Ok(Outcome::Failed(SampleFailure {
            image_id: id.clone(),
            foreground_id: g.fg.asset_id.clone(),
            background_id: bg_id.to_string(),
            message: e.to_string(),
        }))
    };
    let (t, bg) = match (transformed, background) {
        (Ok(t), Ok(bg)) => (t, bg),
        (Err(e), _) | (_, Err(e)) => return fail(e),
    };
    let result = match t.place(bg, location) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if config.in_image_threshold.is_some_and(|th| result.in_image_fraction < th) {
        return Ok(Outcome::Filtered);
    }
    write_png(&images_dir.join(format!("{id}.png")), &result.image)?;
    Ok(Outcome::Kept(SampleRecord {
            image_path: format!("{IMAGES_DIR}/{id}.png"),
            image_id: id,
            foreground_id: g.fg.asset_id.clone(),
            background_id: bg_id.to_string(),
            class_label: g.fg.class_label.clone(),
            target_label_ids: g.fg.target_label_ids.iter().copied().collect(),
            size_fraction: g.size,
            fx: location.0,
            fy: location.1,
            rotation_deg: g.rotation,
        in_image_fraction: result.in_image_fraction,
    }))
}

fn write_png(path: &Path, img: &RgbImage) -> Result<(), SweepError> {
    let mut buf = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(|e| SweepError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    write_atomic(path, &buf).map_err(io_err(path))
}

/// Keeps samples with `in_image_fraction ≥ threshold` without re-rendering.
///
/// The returned manifest records the stricter of the old and new thresholds,
/// so `refilter(refilter(m, a), b) == refilter(m, max(a, b))`.
pub fn refilter(manifest: &DatasetManifest, threshold: f64) -> Result<DatasetManifest, SweepError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(SweepError::BadThreshold(threshold));
    }
    let samples: Vec<SampleRecord> = manifest
        .samples
        .iter()
        .filter(|s| s.in_image_fraction >= threshold)
        .cloned()
        .collect();
    let removed = manifest.samples.len() - samples.len();
    let mut config = manifest.config.clone();
    config.in_image_threshold = Some(config.in_image_threshold.map_or(threshold, |t| t.max(threshold)));
    Ok(DatasetManifest {
        config,
        counts: SampleCounts {
            generated: samples.len(),
            filtered_out: manifest.counts.filtered_out + removed,
            failed: manifest.counts.failed,
        },
        samples,
        failures: manifest.failures.clone(),
    })
}
