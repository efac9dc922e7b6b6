//! Per-model robustness numbers computed from prediction files.
//!
//! A prediction is correct when its rank-1 label is in the sample's target
//! label set. Grid cells and profile bins with no samples are carried as
//! `None`; they are skipped by percentiles and maxima.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{read_jsonl, JsonlError};
use crate::stats::quantile_linear;
use crate::sweep::{DatasetManifest, SampleRecord, LOCATION_STEPS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{count} image ids have no prediction (first: {})", first.join(", "))]
    MissingPredictions { count: usize, first: Vec<String> },
    #[error("predictions line {line}: {message}")]
    PredictionFormat { line: usize, message: String },
    #[error("frame groups: {0}")]
    GroupFormat(String),
    #[error("corruption table line {line}: {message}")]
    CorruptionFormat { line: usize, message: String },
    #[error("corruption tables differ: {0}")]
    ShapeMismatch(String),
    #[error("baseline error for {corruption} is zero")]
    ZeroBaseline { corruption: String },
    #[error("baseline error must be in (0, 1], got {0}")]
    BadBaselineError(f64),
    #[error("error rate must be in [0, 1], got {0}")]
    BadErrorRate(f64),
    #[error("sample {image_id} at ({fx}, {fy}) is not on the location grid")]
    OffGrid { image_id: String, fx: f64, fy: f64 },
    #[error("no cell has any support")]
    NoSupport,
    #[error("every bin has zero accuracy")]
    AllZero,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    DeltaShape((usize, usize), (usize, usize)),
    #[error("inputs normalized differently: {0:?} vs {1:?}")]
    NormalizationMismatch(Normalization, Normalization),
    #[error("empty dataset")]
    Empty,
    #[error("matrix: {0}")]
    Matrix(String),
    #[error("I/O: {0}")]
    Io(String),
}

fn missing(ids: Vec<String>) -> MetricsError {
    MetricsError::MissingPredictions {
        count: ids.len(),
        first: ids.into_iter().take(5).collect(),
    }
}

/// One model's outputs: image id → labels, best first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionSet {
    pub model_id: String,
    pub entries: HashMap<String, Vec<u32>>,
}

impl PredictionSet {
    /// Parses `image_id,rank1[,rank2,...]`. Trailing empty rank cells are
    /// allowed; rank1 is not.
    pub fn from_csv(model_id: &str, reader: impl Read) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| MetricsError::PredictionFormat {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if header.get(0) != Some("image_id") || header.get(1) != Some("rank1") {
            return Err(MetricsError::PredictionFormat {
                line: 1,
                message: "header must start with image_id,rank1".into(),
            });
        }
        let mut entries = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let fail = |message: String| MetricsError::PredictionFormat { line, message };
            let rec = rec.map_err(|e| fail(e.to_string()))?;
            let id = rec.get(0).unwrap_or("").to_string();
            if id.is_empty() {
                return Err(fail("empty image_id".into()));
            }
            let mut ranks = Vec::new();
            for cell in rec.iter().skip(1) {
                if cell.is_empty() {
                    continue;
                }
                ranks.push(cell.parse::<u32>().map_err(|_| fail(format!("label '{cell}' is not an integer")))?);
            }
            if ranks.is_empty() {
                return Err(fail(format!("{id} has no rank1 label")));
            }
            if entries.insert(id.clone(), ranks).is_some() {
                return Err(fail(format!("duplicate image_id {id}")));
            }
        }
        Ok(Self {
            model_id: model_id.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let f = std::fs::File::open(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
        let model = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_csv(&model, f)
    }

    pub fn top1(&self, image_id: &str) -> Option<u32> {
        self.entries.get(image_id).and_then(|r| r.first().copied())
    }
}

fn correctness<'a>(
    preds: &PredictionSet,
    items: impl Iterator<Item = (&'a str, &'a [u32])>,
) -> Result<Vec<bool>, MetricsError> {
    let mut out = Vec::new();
    let mut absent = Vec::new();
    for (id, labels) in items {
        match preds.top1(id) {
            Some(l) => out.push(labels.contains(&l)),
            None => absent.push(id.to_string()),
        }
    }
    if absent.is_empty() {
        Ok(out)
    } else {
        absent.sort();
        Err(missing(absent))
    }
}

fn sample_correctness(preds: &PredictionSet, samples: &[SampleRecord]) -> Result<Vec<bool>, MetricsError> {
    correctness(
        preds,
        samples.iter().map(|s| (s.image_id.as_str(), s.target_label_ids.as_slice())),
    )
}

/// Share of manifest samples whose top-1 prediction is a target label.
pub fn top1_accuracy(preds: &PredictionSet, manifest: &DatasetManifest) -> Result<f64, MetricsError> {
    if manifest.samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let c = sample_correctness(preds, &manifest.samples)?;
    Ok(c.iter().filter(|&&b| b).count() as f64 / c.len() as f64)
}

/// An anchor frame and its temporal neighbors. Both neighbor lists are in
/// chronological order: `neighbors_before` ends with the frame right before
/// the anchor, `neighbors_after` starts with the frame right after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGroup {
    pub group_id: String,
    pub anchor_id: String,
    #[serde(default)]
    pub neighbors_before: Vec<String>,
    #[serde(default)]
    pub neighbors_after: Vec<String>,
    pub label_ids: BTreeSet<u32>,
}

impl FrameGroup {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.label_ids.is_empty() {
            return Err(MetricsError::GroupFormat(format!("group {} has no labels", self.group_id)));
        }
        if self.neighbors_before.contains(&self.anchor_id) || self.neighbors_after.contains(&self.anchor_id) {
            return Err(MetricsError::GroupFormat(format!(
                "group {} lists its anchor as a neighbor",
                self.group_id
            )));
        }
        Ok(())
    }

    /// Anchor plus every neighbor at distance ≤ k, fewer if the group is
    /// shorter on a side.
    pub fn frames_within(&self, k: usize) -> impl Iterator<Item = &str> {
        let b = &self.neighbors_before;
        let before = &b[b.len().saturating_sub(k)..];
        let after = &self.neighbors_after[..k.min(self.neighbors_after.len())];
        std::iter::once(self.anchor_id.as_str())
            .chain(before.iter().map(String::as_str))
            .chain(after.iter().map(String::as_str))
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<Self>, MetricsError> {
        let groups: Vec<Self> = read_jsonl(reader).map_err(|e: JsonlError| MetricsError::GroupFormat(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for g in &groups {
            g.validate()?;
            if !seen.insert(&g.group_id) {
                return Err(MetricsError::GroupFormat(format!("duplicate group_id {}", g.group_id)));
            }
        }
        Ok(groups)
    }

    pub fn load(path: &Path) -> Result<Vec<Self>, MetricsError> {
        let f = std::fs::File::open(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}

/// pm-k: a group counts only if the anchor and every frame within distance
/// `k` of it are classified into the group's labels.
pub fn pm_k_accuracy(preds: &PredictionSet, groups: &[FrameGroup], k: usize) -> Result<f64, MetricsError> {
    if groups.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut absent = BTreeSet::new();
    let mut correct = 0usize;
    for g in groups {
        let mut all = true;
        for id in g.frames_within(k) {
            match preds.top1(id) {
                Some(l) => all &= g.label_ids.contains(&l),
                None => {
                    absent.insert(id.to_string());
                }
            }
        }
        if all {
            correct += 1;
        }
    }
    if !absent.is_empty() {
        return Err(missing(absent.into_iter().collect()));
    }
    Ok(correct as f64 / groups.len() as f64)
}

/// Top-1 accuracy on the anchor frames alone.
pub fn anchor_accuracy(preds: &PredictionSet, groups: &[FrameGroup]) -> Result<f64, MetricsError> {
    if groups.is_empty() {
        return Err(MetricsError::Empty);
    }
    let labels: Vec<Vec<u32>> = groups.iter().map(|g| g.label_ids.iter().copied().collect()).collect();
    let c = correctness(
        preds,
        groups.iter().zip(&labels).map(|(g, l)| (g.anchor_id.as_str(), l.as_slice())),
    )?;
    Ok(c.iter().filter(|&&b| b).count() as f64 / c.len() as f64)
}

/// Error rates keyed by (corruption, severity).
pub type CorruptionTable = BTreeMap<(String, u8), f64>;

/// Parses `corruption,severity,error` rows.
pub fn read_corruption_csv(reader: impl Read) -> Result<CorruptionTable, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut table = CorruptionTable::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let fail = |message: String| MetricsError::CorruptionFormat { line, message };
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        if rec.len() != 3 {
            return Err(fail(format!("expected 3 columns, got {}", rec.len())));
        }
        let sev: u8 = rec[1].parse().map_err(|_| fail(format!("bad severity '{}'", &rec[1])))?;
        let err: f64 = rec[2].parse().map_err(|_| fail(format!("bad error '{}'", &rec[2])))?;
        if !(0.0..=1.0).contains(&err) {
            return Err(fail(format!("error {err} outside [0, 1]")));
        }
        if table.insert((rec[0].to_string(), sev), err).is_some() {
            return Err(fail(format!("duplicate row for {} severity {sev}", &rec[0])));
        }
    }
    Ok(table)
}

/// Mean corruption error: per corruption, summed model error over summed
/// baseline error across severities 1..=5; then 100 × the mean over
/// corruptions.
pub fn mean_corruption_error(model_err: &CorruptionTable, baseline_err: &CorruptionTable) -> Result<f64, MetricsError> {
    let keys: Vec<_> = model_err.keys().collect();
    if keys != baseline_err.keys().collect::<Vec<_>>() {
        return Err(MetricsError::ShapeMismatch("model and baseline keys differ".into()));
    }
    let mut per_corruption: BTreeMap<&str, (f64, f64, BTreeSet<u8>)> = BTreeMap::new();
    for ((c, s), e) in model_err {
        let entry = per_corruption.entry(c.as_str()).or_default();
        entry.0 += e;
        entry.1 += baseline_err[&(c.clone(), *s)];
        entry.2.insert(*s);
    }
    if per_corruption.is_empty() {
        return Err(MetricsError::Empty);
    }
    let full: BTreeSet<u8> = (1..=5).collect();
    let mut ces = Vec::with_capacity(per_corruption.len());
    for (c, (num, den, sevs)) in per_corruption {
        if sevs != full {
            return Err(MetricsError::ShapeMismatch(format!(
                "{c} has severities {sevs:?}, expected 1..=5"
            )));
        }
        if den <= 0.0 {
            return Err(MetricsError::ZeroBaseline { corruption: c.to_string() });
        }
        ces.push(num / den);
    }
    Ok(100.0 * ces.iter().sum::<f64>() / ces.len() as f64)
}

/// `100 · (err_base − err) / err_base`.
pub fn relative_error_reduction(err_base: f64, err: f64) -> Result<f64, MetricsError> {
    if !(err_base > 0.0 && err_base <= 1.0) {
        return Err(MetricsError::BadBaselineError(err_base));
    }
    if !(0.0..=1.0).contains(&err) {
        return Err(MetricsError::BadErrorRate(err));
    }
    Ok(100.0 * (err_base - err) / err_base)
}

/// Relative error reduction of every cell of an accuracy grid against one
/// baseline accuracy.
pub fn error_reduction_grid(baseline_accuracy: f64, accuracies: &Grid) -> Result<Grid, MetricsError> {
    let base = 1.0 - baseline_accuracy;
    let values = accuracies
        .values
        .iter()
        .map(|v| v.map(|a| relative_error_reduction(base, 1.0 - a)).transpose())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Grid {
        values,
        normalization: Normalization::Raw,
        ..accuracies.clone()
    })
}

/// How a grid or profile was rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    /// Divided by the 95th percentile of supported cells.
    P95 { divisor: f64 },
    /// Divided by the best bin.
    Best { divisor: f64 },
    /// Difference of two grids normalized the same way.
    Delta,
}

impl Normalization {
    fn same_rule(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

/// Row-major matrix of optional values with per-cell support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Option<f64>>,
    pub support: Vec<u64>,
    pub normalization: Normalization,
}

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.cols + col]
    }

    pub fn supported(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// Values as CSV rows; missing cells are empty.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| self.get(r, c).map(|v| format!("{v}")).unwrap_or_default())
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_csv(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    /// Reads a headerless CSV matrix; empty cells are missing. Support is set
    /// to 1 for present cells.
    pub fn read_csv(reader: impl Read) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| MetricsError::Matrix(e.to_string()))?;
            if *cols.get_or_insert(rec.len()) != rec.len() {
                return Err(MetricsError::Matrix(format!("row {} has {} cells", i + 1, rec.len())));
            }
            for cell in rec.iter() {
                values.push(if cell.is_empty() {
                    None
                } else {
                    Some(
                        cell.parse::<f64>()
                            .map_err(|_| MetricsError::Matrix(format!("row {}: bad value '{cell}'", i + 1)))?,
                    )
                });
            }
            rows += 1;
        }
        let cols = cols.unwrap_or(0);
        if rows == 0 || cols == 0 {
            return Err(MetricsError::Matrix("empty matrix".into()));
        }
        let support = values.iter().map(|v| v.is_some() as u64).collect();
        Ok(Self {
            rows,
            cols,
            values,
            support,
            normalization: Normalization::Raw,
        })
    }
}

/// Mean accuracy per location on the 21 × 21 grid; row = y, column = x.
pub fn location_heatmap(preds: &PredictionSet, manifest: &DatasetManifest) -> Result<Grid, MetricsError> {
    let n = LOCATION_STEPS as usize + 1;
    let cell = |v: f64| -> Option<usize> {
        let s = v * LOCATION_STEPS as f64;
        let i = s.round();
        ((s - i).abs() <= 1e-6 && (0.0..=LOCATION_STEPS as f64).contains(&i)).then_some(i as usize)
    };
    let mut hits = vec![0u64; n * n];
    let mut support = vec![0u64; n * n];
    let correct = sample_correctness(preds, &manifest.samples)?;
    for (s, ok) in manifest.samples.iter().zip(correct) {
        let (Some(x), Some(y)) = (cell(s.fx), cell(s.fy)) else {
            return Err(MetricsError::OffGrid {
                image_id: s.image_id.clone(),
                fx: s.fx,
                fy: s.fy,
            });
        };
        support[y * n + x] += 1;
        hits[y * n + x] += ok as u64;
    }
    Ok(Grid {
        rows: n,
        cols: n,
        values: hits
            .iter()
            .zip(&support)
            .map(|(&h, &s)| (s > 0).then(|| h as f64 / s as f64))
            .collect(),
        support,
        normalization: Normalization::Raw,
    })
}

/// Divides each cell by the 95th percentile of the supported cells.
pub fn normalize_p95(grid: &Grid) -> Result<Grid, MetricsError> {
    let vals = grid.supported();
    if vals.is_empty() {
        return Err(MetricsError::NoSupport);
    }
    let p95 = quantile_linear(&vals, 0.95).map_err(|e| MetricsError::Matrix(e.to_string()))?;
    if p95 <= 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok(Grid {
        values: grid.values.iter().map(|v| v.map(|a| a / p95)).collect(),
        normalization: Normalization::P95 { divisor: p95 },
        ..grid.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Size,
    Rotation,
    X,
    Y,
}

impl Factor {
    fn of(&self, s: &SampleRecord) -> f64 {
        match self {
            Self::Size => s.size_fraction,
            Self::Rotation => s.rotation_deg,
            Self::X => s.fx,
            Self::Y => s.fy,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Size => "size",
            Self::Rotation => "rotation",
            Self::X => "x",
            Self::Y => "y",
        }
    }
}

impl std::str::FromStr for Factor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(Self::Size),
            "rotation" => Ok(Self::Rotation),
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            o => Err(format!("unknown factor '{o}'")),
        }
    }
}

/// Accuracy along one factor of variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorProfile {
    pub factor_name: String,
    pub bins: Vec<f64>,
    pub accuracy: Vec<Option<f64>>,
    pub support: Vec<u64>,
    pub normalization: Normalization,
}

/// Groups samples by one factor. Bins are the config's values for that
/// factor, so values with no surviving samples show up as missing.
pub fn factor_profile(preds: &PredictionSet, manifest: &DatasetManifest, factor: Factor) -> Result<FactorProfile, MetricsError> {
    let cfg = &manifest.config;
    let mut bins: Vec<f64> = match factor {
        Factor::Size => cfg.size_fractions.clone(),
        Factor::Rotation => cfg.rotations_deg.clone(),
        Factor::X => cfg.locations.iter().map(|l| l.0).collect(),
        Factor::Y => cfg.locations.iter().map(|l| l.1).collect(),
    };
    bins.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bins.dedup();
    let index: HashMap<u64, usize> = bins.iter().enumerate().map(|(i, b)| (b.to_bits(), i)).collect();
    let mut hits = vec![0u64; bins.len()];
    let mut support = vec![0u64; bins.len()];
    let correct = sample_correctness(preds, &manifest.samples)?;
    for (s, ok) in manifest.samples.iter().zip(correct) {
        let v = factor.of(s);
        let &i = index
            .get(&v.to_bits())
            .ok_or_else(|| MetricsError::Matrix(format!("sample {} has {} = {v}, not in config", s.image_id, factor.name())))?;
        support[i] += 1;
        hits[i] += ok as u64;
    }
    Ok(FactorProfile {
        factor_name: factor.name().to_string(),
        bins,
        accuracy: hits
            .iter()
            .zip(&support)
            .map(|(&h, &s)| (s > 0).then(|| h as f64 / s as f64))
            .collect(),
        support,
        normalization: Normalization::Raw,
    })
}

/// Divides each bin by the best bin.
pub fn normalize_best(profile: &FactorProfile) -> Result<FactorProfile, MetricsError> {
    let best = profile.accuracy.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(MetricsError::NoSupport);
    }
    if best <= 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok(FactorProfile {
        accuracy: profile.accuracy.iter().map(|v| v.map(|a| a / best)).collect(),
        normalization: Normalization::Best { divisor: best },
        ..profile.clone()
    })
}

/// Shared shape for grids and profiles so [`delta_map`] works on both.
pub trait Cells: Sized {
    fn shape(&self) -> (usize, usize);
    fn cells(&self) -> &[Option<f64>];
    fn normalization(&self) -> Normalization;
    fn with_cells(&self, cells: Vec<Option<f64>>, normalization: Normalization) -> Self;
}

impl Cells for Grid {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn cells(&self) -> &[Option<f64>] {
        &self.values
    }
    fn normalization(&self) -> Normalization {
        self.normalization
    }
    fn with_cells(&self, cells: Vec<Option<f64>>, normalization: Normalization) -> Self {
        Grid {
            values: cells,
            normalization,
            ..self.clone()
        }
    }
}

impl Cells for FactorProfile {
    fn shape(&self) -> (usize, usize) {
        (1, self.bins.len())
    }
    fn cells(&self) -> &[Option<f64>] {
        &self.accuracy
    }
    fn normalization(&self) -> Normalization {
        self.normalization
    }
    fn with_cells(&self, cells: Vec<Option<f64>>, normalization: Normalization) -> Self {
        FactorProfile {
            accuracy: cells,
            normalization,
            ..self.clone()
        }
    }
}

/// Elementwise `other − reference`; missing if either side is.
pub fn delta_map<T: Cells>(reference: &T, other: &T) -> Result<T, MetricsError> {
    if reference.shape() != other.shape() {
        return Err(MetricsError::DeltaShape(reference.shape(), other.shape()));
    }
    if !reference.normalization().same_rule(&other.normalization()) {
        return Err(MetricsError::NormalizationMismatch(reference.normalization(), other.normalization()));
    }
    let cells = reference
        .cells()
        .iter()
        .zip(other.cells())
        .map(|(r, o)| Some((*o)? - (*r)?))
        .collect();
    Ok(other.with_cells(cells, Normalization::Delta))
}
