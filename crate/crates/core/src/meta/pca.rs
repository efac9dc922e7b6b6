//! Dimensionality of the residual metric space.
//!
//! Each metric is regressed on the reference metric; PCA runs on the
//! correlation matrix of the residuals. A permutation null shuffles every
//! residual column independently, which keeps each metric's distribution but
//! destroys the structure between metrics. A model bootstrap gives intervals
//! on the observed fractions.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ols_residuals, AnalysisError, MetricsTable};
use crate::seeding::indexed_stream;
use crate::stats::quantile_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualPcaConfig {
    pub n_components: usize,
    pub permutations: usize,
    pub bootstrap_n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPcaResult {
    pub reference_metric: String,
    pub metrics: Vec<String>,
    /// Leading variance fractions, non-increasing.
    pub variance_fractions: Vec<f64>,
    /// [2.5%, 97.5%] of each component's fraction under the permutation null.
    pub null_bands: Vec<[f64; 2]>,
    /// [2.5%, 97.5%] of each component's fraction over model resamples.
    pub bootstrap_ci: Vec<[f64; 2]>,
    /// Observed fraction above the null band's upper edge.
    pub above_null: Vec<bool>,
    pub permutations: usize,
    pub bootstrap_n: usize,
    /// Resamples actually used; a resample whose reference column is constant
    /// cannot be residualized and is skipped.
    pub bootstrap_used: usize,
    pub seed: u64,
}

/// All variance fractions of the column-standardized matrix, largest first.
/// Constant columns contribute nothing; if every column is constant all
/// fractions are zero.
pub fn variance_fractions(columns: &[Vec<f64>]) -> Vec<f64> {
    let m = columns.len();
    if m == 0 {
        return vec![];
    }
    let n = columns[0].len();
    let z = DMatrix::from_fn(n, m, |i, j| {
        let c = &columns[j];
        let mean = c.iter().sum::<f64>() / n as f64;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd > 0.0 {
            (c[i] - mean) / sd
        } else {
            0.0
        }
    });
    let corr = (z.transpose() * &z) / n as f64;
    let corr = (&corr + corr.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(corr).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return vec![0.0; m];
    }
    eig.iter().map(|v| v / total).collect()
}

fn band(samples: &[Vec<f64>], k: usize) -> Result<[f64; 2], AnalysisError> {
    let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
    let q = |p| {
        quantile_linear(&col, p).map_err(|source| AnalysisError::Stats {
            context: "percentile band".into(),
            source,
        })
    };
    Ok([q(0.025)?, q(0.975)?])
}

pub fn residual_pca(table: &MetricsTable, metrics: &[&str], config: &ResidualPcaConfig) -> Result<ResidualPcaResult, AnalysisError> {
    let k = config.n_components;
    if k == 0 || metrics.len() < k {
        return Err(AnalysisError::Invalid(format!(
            "n_components must be in 1..={}, got {k}",
            metrics.len()
        )));
    }
    if config.permutations == 0 || config.bootstrap_n == 0 {
        return Err(AnalysisError::Invalid("permutations and bootstrap_n must be positive".into()));
    }
    if metrics.contains(&table.reference_metric.as_str()) {
        return Err(AnalysisError::IsReference(table.reference_metric.clone()));
    }
    let reference = table.reference()?;
    let raw: Vec<Vec<f64>> = metrics.iter().map(|m| table.column(m)).collect::<Result<_, _>>()?;
    let residuals: Vec<Vec<f64>> = raw
        .iter()
        .map(|c| ols_residuals(&reference, c))
        .collect::<Result<_, _>>()?;
    let observed = variance_fractions(&residuals);

    let null: Vec<Vec<f64>> = (0..config.permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = indexed_stream(config.seed, "pca_permutation", p as u64);
            let shuffled: Vec<Vec<f64>> = residuals
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    c.shuffle(&mut rng);
                    c
                })
                .collect();
            variance_fractions(&shuffled)
        })
        .collect();

    let n = reference.len();
    let boot: Vec<Vec<f64>> = (0..config.bootstrap_n)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = indexed_stream(config.seed, "pca_bootstrap", b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let r: Vec<f64> = idx.iter().map(|&i| reference[i]).collect();
            let cols: Option<Vec<Vec<f64>>> = raw
                .iter()
                .map(|c| {
                    let y: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
                    ols_residuals(&r, &y).ok()
                })
                .collect();
            cols.map(|c| variance_fractions(&c))
        })
        .collect();
    if boot.is_empty() {
        return Err(AnalysisError::Invalid("every bootstrap resample had a constant reference".into()));
    }

    let null_bands = (0..k).map(|c| band(&null, c)).collect::<Result<Vec<_>, _>>()?;
    let bootstrap_ci = (0..k).map(|c| band(&boot, c)).collect::<Result<Vec<_>, _>>()?;
    let variance_fractions: Vec<f64> = observed[..k].to_vec();
    Ok(ResidualPcaResult {
        reference_metric: table.reference_metric.clone(),
        metrics: metrics.iter().map(|s| s.to_string()).collect(),
        above_null: variance_fractions.iter().zip(&null_bands).map(|(v, b)| *v > b[1]).collect(),
        variance_fractions,
        null_bands,
        bootstrap_ci,
        permutations: config.permutations,
        bootstrap_n: config.bootstrap_n,
        bootstrap_used: boot.len(),
        seed: config.seed,
    })
}
