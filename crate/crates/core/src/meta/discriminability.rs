//! How much a metric helps tell model groups apart beyond the reference.
//!
//! For each bootstrap resample (drawn with replacement within each group, so
//! every group keeps its size), two softmax classifiers are fit: one on the
//! reference metric alone and one on the reference plus the extra metrics.
//! Features are standardized per resample. Both are scored in-sample on the
//! same resample; the entry reports the mean and s.d. of the accuracy gain.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_multinomial, standardize_columns, LogisticConfig};
use super::{AnalysisError, MetricsTable};
use crate::seeding::indexed_stream;
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminabilityConfig {
    pub bootstrap_n: usize,
    pub seed: u64,
    pub logistic: LogisticConfig,
}

impl DiscriminabilityConfig {
    pub fn new(bootstrap_n: usize, seed: u64) -> Self {
        Self {
            bootstrap_n,
            seed,
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminabilityEntry {
    pub feature_set: Vec<String>,
    pub mean_delta: f64,
    pub sd_delta: f64,
    pub mean_reference_accuracy: f64,
    pub mean_augmented_accuracy: f64,
    pub bootstrap_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminabilityResult {
    pub reference_metric: String,
    pub groups: Vec<String>,
    pub bootstrap_n: usize,
    pub seed: u64,
    pub l2: f64,
    /// Always "in_sample": classifiers are scored on the resample they were
    /// fit on.
    pub evaluation: String,
    pub entries: Vec<DiscriminabilityEntry>,
}

/// Row indices of every resample, group-stratified.
pub fn bootstrap_resamples(table: &MetricsTable, bootstrap_n: usize, seed: u64) -> Vec<Vec<usize>> {
    let (labels, idx) = table.group_indices();
    let members: Vec<Vec<usize>> = (0..labels.len())
        .map(|g| (0..idx.len()).filter(|&i| idx[i] == g).collect())
        .collect();
    (0..bootstrap_n)
        .map(|b| {
            let mut rng = indexed_stream(seed, "discriminability", b as u64);
            members
                .iter()
                .flat_map(|m| (0..m.len()).map(|_| m[rng.random_range(0..m.len())]).collect::<Vec<_>>())
                .collect()
        })
        .collect()
}

fn check(table: &MetricsTable, config: &DiscriminabilityConfig) -> Result<(Vec<usize>, usize), AnalysisError> {
    if config.bootstrap_n == 0 {
        return Err(AnalysisError::TooFew {
            what: "bootstrap resamples",
            needed: 1,
            got: 0,
        });
    }
    let (labels, idx) = table.group_indices();
    if labels.len() < 2 {
        return Err(AnalysisError::TooFew {
            what: "model groups",
            needed: 2,
            got: labels.len(),
        });
    }
    Ok((idx, labels.len()))
}

fn resample_accuracy(
    columns: &[Vec<f64>],
    groups: &[usize],
    classes: usize,
    sample: &[usize],
    logistic: &LogisticConfig,
) -> Result<f64, String> {
    let mut rows: Vec<Vec<f64>> = sample.iter().map(|&i| columns.iter().map(|c| c[i]).collect()).collect();
    standardize_columns(&mut rows);
    let keep = independent_columns(&rows);
    if keep.len() < columns.len() {
        for r in &mut rows {
            *r = keep.iter().map(|&j| r[j]).collect();
        }
    }
    let labels: Vec<usize> = sample.iter().map(|&i| groups[i]).collect();
    let model = fit_multinomial(&rows, &labels, classes, logistic)?;
    Ok(model.accuracy(&rows, &labels))
}

/// Indices of the columns to fit on: a column that is an exact linear
/// combination of earlier ones is aliased and dropped, so duplicating a
/// feature cannot change the fit by splitting its L2 penalty. Constant
/// columns are all zero after standardization and are kept; they carry no
/// weight either way.
fn independent_columns(rows: &[Vec<f64>]) -> Vec<usize> {
    let d = rows.first().map_or(0, Vec::len);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            keep.push(j);
            continue;
        }
        let mut resid = col;
        for q in &basis {
            let dot: f64 = resid.iter().zip(q).map(|(a, b)| a * b).sum();
            resid.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let rnorm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        if j == 0 || rnorm > ALIAS_TOLERANCE * norm {
            resid.iter_mut().for_each(|v| *v /= rnorm);
            basis.push(resid);
            keep.push(j);
        }
    }
    keep
}

const ALIAS_TOLERANCE: f64 = 1e-9;

fn summarize(feature_set: Vec<String>, base: &[f64], aug: &[f64]) -> DiscriminabilityEntry {
    let deltas: Vec<f64> = aug.iter().zip(base).map(|(a, b)| a - b).collect();
    DiscriminabilityEntry {
        feature_set,
        mean_delta: mean(&deltas),
        sd_delta: sample_sd(&deltas),
        mean_reference_accuracy: mean(base),
        mean_augmented_accuracy: mean(aug),
        bootstrap_n: deltas.len(),
    }
}

fn reference_accuracies(
    table: &MetricsTable,
    groups: &[usize],
    classes: usize,
    samples: &[Vec<usize>],
    config: &DiscriminabilityConfig,
) -> Result<Vec<f64>, AnalysisError> {
    let cols = vec![table.reference()?];
    samples
        .par_iter()
        .map(|s| resample_accuracy(&cols, groups, classes, s, &config.logistic))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|detail| AnalysisError::NonConvergence {
            feature_set: table.reference_metric.clone(),
            detail,
        })
}

fn augmented_accuracies(
    table: &MetricsTable,
    extras: &[&str],
    groups: &[usize],
    classes: usize,
    samples: &[Vec<usize>],
    config: &DiscriminabilityConfig,
) -> Result<Vec<f64>, AnalysisError> {
    let mut cols = vec![table.reference()?];
    for e in extras {
        if *e == table.reference_metric {
            return Err(AnalysisError::IsReference(e.to_string()));
        }
        cols.push(table.column(e)?);
    }
    samples
        .par_iter()
        .map(|s| resample_accuracy(&cols, groups, classes, s, &config.logistic))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|detail| AnalysisError::NonConvergence {
            feature_set: std::iter::once(table.reference_metric.as_str())
                .chain(extras.iter().copied())
                .collect::<Vec<_>>()
                .join(", "),
            detail,
        })
}

/// Accuracy gain from adding `extras` (at most two metrics) to the reference.
pub fn discriminability(
    table: &MetricsTable,
    extras: &[&str],
    config: &DiscriminabilityConfig,
) -> Result<DiscriminabilityEntry, AnalysisError> {
    if extras.is_empty() || extras.len() > 2 {
        return Err(AnalysisError::Invalid("discriminability takes one or two extra metrics".into()));
    }
    let (groups, classes) = check(table, config)?;
    let samples = bootstrap_resamples(table, config.bootstrap_n, config.seed);
    let base = reference_accuracies(table, &groups, classes, &samples, config)?;
    let aug = augmented_accuracies(table, extras, &groups, classes, &samples, config)?;
    Ok(summarize(extras.iter().map(|s| s.to_string()).collect(), &base, &aug))
}

/// Every single candidate and, when `max_extras` is 2, every unordered pair.
/// All sets share the same resamples and reference fits. Entries are in
/// enumeration order; callers sort as they like.
pub fn discriminability_sweep(
    table: &MetricsTable,
    candidates: &[&str],
    max_extras: usize,
    config: &DiscriminabilityConfig,
) -> Result<DiscriminabilityResult, AnalysisError> {
    if !(1..=2).contains(&max_extras) {
        return Err(AnalysisError::Invalid("max_extras must be 1 or 2".into()));
    }
    let (groups, classes) = check(table, config)?;
    let samples = bootstrap_resamples(table, config.bootstrap_n, config.seed);
    let base = reference_accuracies(table, &groups, classes, &samples, config)?;
    let mut sets: Vec<Vec<&str>> = candidates.iter().map(|c| vec![*c]).collect();
    if max_extras == 2 {
        for i in 0..candidates.len() {
            for j in i + 1..candidates.len() {
                sets.push(vec![candidates[i], candidates[j]]);
            }
        }
    }
    let entries = sets
        .iter()
        .map(|set| {
            let aug = augmented_accuracies(table, set, &groups, classes, &samples, config)?;
            Ok(summarize(set.iter().map(|s| s.to_string()).collect(), &base, &aug))
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(DiscriminabilityResult {
        reference_metric: table.reference_metric.clone(),
        groups: table.group_indices().0,
        bootstrap_n: config.bootstrap_n,
        seed: config.seed,
        l2: config.logistic.l2,
        evaluation: "in_sample".into(),
        entries,
    })
}
