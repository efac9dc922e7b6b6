//! Foreground/background asset ingestion and the JSONL asset manifest.
//!
//! Foregrounds are read from `<dir>/<class_label>/<name>.png`. An optional
//! sidecar `<name>.json` next to a raster may carry `{"occluded": bool,
//! "truncated": bool}`; flagged objects are excluded unless the caller opts
//! in. Backgrounds are every PNG below the background directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{read_jsonl, to_jsonl, write_atomic, JsonlError};
use crate::raster::{opaque_extent, BBox};

/// Opaque means `alpha > DEFAULT_ALPHA_THRESHOLD`.
pub const DEFAULT_ALPHA_THRESHOLD: u8 = 127;
pub const MANIFEST_FORMAT: &str = "si-forge-assets";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("class '{0}' has no entry in the class map")]
    UnmappedClass(String),
    #[error("class map line {line}: {message}")]
    ClassMap { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest: {0}")]
    Jsonl(#[from] JsonlError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CatalogError + '_ {
    move |source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetFlags {
    #[serde(default)]
    pub occluded: bool,
    #[serde(default)]
    pub truncated: bool,
}

impl AssetFlags {
    pub fn any(&self) -> bool {
        self.occluded || self.truncated
    }
}

/// A masked object cut-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForegroundAsset {
    pub asset_id: String,
    pub class_label: String,
    /// Classifier label ids the class maps to; a prediction counts as correct
    /// if its top-1 label is any of these.
    pub target_label_ids: BTreeSet<u32>,
    pub raster_path: PathBuf,
    pub tight_bbox: BBox,
    pub opaque_area_px: u64,
    #[serde(default)]
    pub flags: AssetFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundAsset {
    pub asset_id: String,
    pub raster_path: PathBuf,
    pub width_px: u32,
    pub height_px: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetManifest {
    pub foregrounds: Vec<ForegroundAsset>,
    pub backgrounds: Vec<BackgroundAsset>,
    pub mask_alpha_threshold: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestLine {
    Header {
        format: String,
        version: u32,
        mask_alpha_threshold: u8,
    },
    Foreground(ForegroundAsset),
    Background(BackgroundAsset),
}

impl AssetManifest {
    pub fn new(foregrounds: Vec<ForegroundAsset>, backgrounds: Vec<BackgroundAsset>, mask_alpha_threshold: u8) -> Self {
        let mut m = Self {
            foregrounds,
            backgrounds,
            mask_alpha_threshold,
        };
        m.canonicalize();
        m
    }

    /// Sorts both lists by asset id.
    pub fn canonicalize(&mut self) {
        self.foregrounds.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
        self.backgrounds.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
    }

    /// Header line, then foregrounds, then backgrounds, each sorted by id.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut sorted = self.clone();
        sorted.canonicalize();
        let lines = std::iter::once(ManifestLine::Header {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            mask_alpha_threshold: sorted.mask_alpha_threshold,
        })
        .chain(sorted.foregrounds.into_iter().map(ManifestLine::Foreground))
        .chain(sorted.backgrounds.into_iter().map(ManifestLine::Background));
        to_jsonl(lines).expect("asset records always serialize")
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, CatalogError> {
        let lines: Vec<ManifestLine> = read_jsonl(reader)?;
        let mut threshold = None;
        let mut fgs = Vec::new();
        let mut bgs = Vec::new();
        for line in lines {
            match line {
                ManifestLine::Header {
                    format,
                    version,
                    mask_alpha_threshold,
                } => {
                    if format != MANIFEST_FORMAT || version != MANIFEST_VERSION {
                        return Err(CatalogError::Manifest(format!(
                            "unsupported header {format} v{version}"
                        )));
                    }
                    if threshold.replace(mask_alpha_threshold).is_some() {
                        return Err(CatalogError::Manifest("more than one header line".into()));
                    }
                }
                ManifestLine::Foreground(f) => fgs.push(f),
                ManifestLine::Background(b) => bgs.push(b),
            }
        }
        let threshold = threshold.ok_or_else(|| CatalogError::Manifest("missing header line".into()))?;
        Ok(Self {
            foregrounds: fgs,
            backgrounds: bgs,
            mask_alpha_threshold: threshold,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let f = fs::File::open(path).map_err(io_err(path))?;
        Self::from_jsonl(BufReader::new(f))
    }

    pub fn save(&self, path: &Path) -> Result<(), CatalogError> {
        write_atomic(path, &self.to_jsonl()).map_err(io_err(path))
    }
}

/// `class_label → target label ids`, read from `class_label,label_id` rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassMap(pub BTreeMap<String, BTreeSet<u32>>);

impl ClassMap {
    pub fn from_csv(reader: impl Read) -> Result<Self, CatalogError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut map: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| CatalogError::ClassMap {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(CatalogError::ClassMap {
                    line,
                    message: format!("expected 2 columns, got {}", rec.len()),
                });
            }
            let id: u32 = rec[1].parse().map_err(|_| CatalogError::ClassMap {
                line,
                message: format!("label id '{}' is not a non-negative integer", &rec[1]),
            })?;
            map.entry(rec[0].to_string()).or_default().insert(id);
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let f = fs::File::open(path).map_err(io_err(path))?;
        Self::from_csv(f)
    }

    pub fn get(&self, class_label: &str) -> Option<&BTreeSet<u32>> {
        self.0.get(class_label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestErrorKind {
    Undecodable,
    NoOpaquePixels,
    TooSmall,
    ExcludedFlagged,
    NotInClassDir,
    BadSidecar,
}

/// One skipped file; ingestion continues past these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestErrorRecord {
    pub path: PathBuf,
    pub kind: IngestErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub alpha_threshold: u8,
    /// Keep objects flagged occluded or truncated.
    pub include_flagged: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            alpha_threshold: DEFAULT_ALPHA_THRESHOLD,
            include_flagged: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested<T> {
    pub assets: Vec<T>,
    pub errors: Vec<IngestErrorRecord>,
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn collect_pngs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CatalogError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        let ft = entry.file_type().map_err(io_err(&path))?;
        if ft.is_dir() {
            collect_pngs(&path, out)?;
        } else if is_png(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// `a/b/c.png` relative to `root` → `"a/b/c"`.
fn relative_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path).with_extension("");
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn record(path: &Path, kind: IngestErrorKind, message: impl Into<String>) -> IngestErrorRecord {
    IngestErrorRecord {
        path: path.to_path_buf(),
        kind,
        message: message.into(),
    }
}

fn read_sidecar(png: &Path) -> Result<AssetFlags, String> {
    let sidecar = png.with_extension("json");
    match fs::read(&sidecar) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", sidecar.display())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(AssetFlags::default()),
        Err(e) => Err(format!("{}: {e}", sidecar.display())),
    }
}

/// Catalogs every `<dir>/<class>/*.png` cut-out.
///
/// Fails outright if a class directory has no class-map entry. Per-file
/// problems (undecodable, fully transparent, flagged) become error records.
pub fn ingest_foregrounds(
    dir: &Path,
    class_map: &ClassMap,
    options: IngestOptions,
) -> Result<Ingested<ForegroundAsset>, CatalogError> {
    let mut files = Vec::new();
    collect_pngs(dir, &mut files)?;
    files.sort();

    let mut errors = Vec::new();
    let mut jobs = Vec::new();
    for path in files {
        let rel = path.strip_prefix(dir).unwrap_or(&path);
        let class_label = match rel.components().count() {
            2 => rel.components().next().unwrap().as_os_str().to_string_lossy().into_owned(),
            _ => {
                errors.push(record(
                    &path,
                    IngestErrorKind::NotInClassDir,
                    "foreground rasters must sit directly inside a class directory",
                ));
                continue;
            }
        };
        let labels = class_map
            .get(&class_label)
            .ok_or_else(|| CatalogError::UnmappedClass(class_label.clone()))?;
        if labels.is_empty() {
            return Err(CatalogError::UnmappedClass(class_label));
        }
        jobs.push((path, class_label, labels.clone()));
    }

    let threshold = options.alpha_threshold;
    let results: Vec<Result<ForegroundAsset, IngestErrorRecord>> = jobs
        .into_par_iter()
        .map(|(path, class_label, labels)| {
            let flags = read_sidecar(&path).map_err(|m| record(&path, IngestErrorKind::BadSidecar, m))?;
            if flags.any() && !options.include_flagged {
                let which = if flags.occluded { "occluded" } else { "truncated" };
                return Err(record(
                    &path,
                    IngestErrorKind::ExcludedFlagged,
                    format!("object flagged {which}"),
                ));
            }
            let img = image::open(&path)
                .map_err(|e| record(&path, IngestErrorKind::Undecodable, e.to_string()))?
                .to_rgba8();
            let (tight_bbox, opaque_area_px) = opaque_extent(&img, threshold)
                .ok_or_else(|| record(&path, IngestErrorKind::NoOpaquePixels, "no opaque pixels"))?;
            Ok(ForegroundAsset {
                asset_id: relative_id(dir, &path),
                class_label,
                target_label_ids: labels,
                raster_path: path,
                tight_bbox,
                opaque_area_px,
                flags,
            })
        })
        .collect();

    let mut assets = Vec::new();
    for r in results {
        match r {
            Ok(a) => assets.push(a),
            Err(e) => errors.push(e),
        }
    }
    assets.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
    errors.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Ingested { assets, errors })
}

/// Catalogs every PNG below `dir` whose shorter side is at least `min_side`.
pub fn ingest_backgrounds(dir: &Path, min_side: u32) -> Result<Ingested<BackgroundAsset>, CatalogError> {
    let mut files = Vec::new();
    collect_pngs(dir, &mut files)?;
    files.sort();
    let results: Vec<Result<BackgroundAsset, IngestErrorRecord>> = files
        .into_par_iter()
        .map(|path| {
            let img = image::open(&path).map_err(|e| record(&path, IngestErrorKind::Undecodable, e.to_string()))?;
            let (w, h) = (img.width(), img.height());
            if w.min(h) < min_side {
                return Err(record(
                    &path,
                    IngestErrorKind::TooSmall,
                    format!("{w}x{h} has a side shorter than {min_side}"),
                ));
            }
            Ok(BackgroundAsset {
                asset_id: relative_id(dir, &path),
                raster_path: path,
                width_px: w,
                height_px: h,
            })
        })
        .collect();
    let mut assets = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(a) => assets.push(a),
            Err(e) => errors.push(e),
        }
    }
    assets.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
    errors.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Ingested { assets, errors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    DuplicateId { list: String, asset_id: String, occurrences: usize },
    MissingFile { asset_id: String, path: PathBuf },
    Undecodable { asset_id: String, path: PathBuf, message: String },
    EmptyLabels { asset_id: String },
    NoOpaquePixels { asset_id: String },
    BboxMismatch { asset_id: String, stored: BBox, actual: BBox },
    AreaMismatch { asset_id: String, stored: u64, actual: u64 },
    AreaExceedsBbox { asset_id: String, area: u64, bbox_area: u64 },
    DimensionMismatch { asset_id: String, stored: (u32, u32), actual: (u32, u32) },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

fn duplicates<'a>(list: &str, ids: impl Iterator<Item = &'a str>) -> Vec<Finding> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for id in ids {
        *counts.entry(id).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(id, n)| Finding::DuplicateId {
            list: list.to_string(),
            asset_id: id.to_string(),
            occurrences: n,
        })
        .collect()
}

fn check_foreground(f: &ForegroundAsset, threshold: u8) -> Vec<Finding> {
    let id = || f.asset_id.clone();
    let mut out = Vec::new();
    if f.target_label_ids.is_empty() {
        out.push(Finding::EmptyLabels { asset_id: id() });
    }
    if f.opaque_area_px > f.tight_bbox.area() {
        out.push(Finding::AreaExceedsBbox {
            asset_id: id(),
            area: f.opaque_area_px,
            bbox_area: f.tight_bbox.area(),
        });
    }
    if !f.raster_path.exists() {
        out.push(Finding::MissingFile {
            asset_id: id(),
            path: f.raster_path.clone(),
        });
        return out;
    }
    let img = match image::open(&f.raster_path) {
        Ok(i) => i.to_rgba8(),
        Err(e) => {
            out.push(Finding::Undecodable {
                asset_id: id(),
                path: f.raster_path.clone(),
                message: e.to_string(),
            });
            return out;
        }
    };
    match opaque_extent(&img, threshold) {
        None => out.push(Finding::NoOpaquePixels { asset_id: id() }),
        Some((bbox, area)) => {
            if bbox != f.tight_bbox {
                out.push(Finding::BboxMismatch {
                    asset_id: id(),
                    stored: f.tight_bbox,
                    actual: bbox,
                });
            }
            if area != f.opaque_area_px {
                out.push(Finding::AreaMismatch {
                    asset_id: id(),
                    stored: f.opaque_area_px,
                    actual: area,
                });
            }
        }
    }
    out
}

fn check_background(b: &BackgroundAsset) -> Vec<Finding> {
    if !b.raster_path.exists() {
        return vec![Finding::MissingFile {
            asset_id: b.asset_id.clone(),
            path: b.raster_path.clone(),
        }];
    }
    match image::image_dimensions(&b.raster_path).and_then(|d| image::open(&b.raster_path).map(|_| d)) {
        Err(e) => vec![Finding::Undecodable {
            asset_id: b.asset_id.clone(),
            path: b.raster_path.clone(),
            message: e.to_string(),
        }],
        Ok(actual) if actual != (b.width_px, b.height_px) => vec![Finding::DimensionMismatch {
            asset_id: b.asset_id.clone(),
            stored: (b.width_px, b.height_px),
            actual,
        }],
        Ok(_) => vec![],
    }
}

/// Re-checks every stored invariant against the rasters on disk.
pub fn validate_manifest(manifest: &AssetManifest) -> ValidationReport {
    let mut findings = duplicates("foregrounds", manifest.foregrounds.iter().map(|f| f.asset_id.as_str()));
    findings.extend(duplicates(
        "backgrounds",
        manifest.backgrounds.iter().map(|b| b.asset_id.as_str()),
    ));
    let threshold = manifest.mask_alpha_threshold;
    let fg: Vec<Finding> = manifest
        .foregrounds
        .par_iter()
        .flat_map_iter(|f| check_foreground(f, threshold))
        .collect();
    let bg: Vec<Finding> = manifest.backgrounds.par_iter().flat_map_iter(check_background).collect();
    findings.extend(fg);
    findings.extend(bg);
    ValidationReport { findings }
}

/// Looks up assets by id.
pub struct AssetIndex<'a> {
    pub foregrounds: HashMap<&'a str, &'a ForegroundAsset>,
    pub backgrounds: HashMap<&'a str, &'a BackgroundAsset>,
}

impl<'a> AssetIndex<'a> {
    pub fn new(m: &'a AssetManifest) -> Self {
        Self {
            foregrounds: m.foregrounds.iter().map(|f| (f.asset_id.as_str(), f)).collect(),
            backgrounds: m.backgrounds.iter().map(|b| (b.asset_id.as_str(), b)).collect(),
        }
    }
}
