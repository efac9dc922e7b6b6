//! Statistics over a models × metrics table.
//!
//! Every routine works on complete columns: a metric with a missing value
//! for any model is rejected wherever it is used, never imputed.

mod discriminability;
mod logistic;
mod pca;

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stats::{self, StatsError};

pub use discriminability::{
    bootstrap_resamples, discriminability, discriminability_sweep, DiscriminabilityConfig, DiscriminabilityEntry,
    DiscriminabilityResult,
};
pub use logistic::{fit_multinomial, standardize_columns, LogisticConfig, LogisticModel};
pub use pca::{residual_pca, variance_fractions, ResidualPcaConfig, ResidualPcaResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("metrics table line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("metric '{0}' has missing values")]
    MissingValues(String),
    #[error("reference metric '{0}' is not in the table")]
    NoReference(String),
    #[error("'{0}' is the reference metric")]
    IsReference(String),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew { what: &'static str, needed: usize, got: usize },
    #[error("reference metric is constant")]
    ConstantReference,
    #[error("{context}: {source}")]
    Stats {
        context: String,
        #[source]
        source: StatsError,
    },
    #[error("logistic regression did not converge for feature set [{feature_set}]: {detail}")]
    NonConvergence { feature_set: String, detail: String },
    #[error("{0}")]
    Invalid(String),
    #[error("I/O: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub group_label: String,
}

/// Models × metrics. `values[i][j]` is model `i` on metric `j`; NaN marks a
/// missing entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub models: Vec<ModelInfo>,
    pub metric_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Anchor metric everything else is compared against (e.g. ImageNet
    /// accuracy).
    pub reference_metric: String,
}

impl MetricsTable {
    pub fn new(
        models: Vec<ModelInfo>,
        metric_names: Vec<String>,
        values: Vec<Vec<f64>>,
        reference_metric: &str,
    ) -> Result<Self, AnalysisError> {
        if values.len() != models.len() || values.iter().any(|r| r.len() != metric_names.len()) {
            return Err(AnalysisError::Invalid("values do not match models × metrics".into()));
        }
        let uniq: BTreeSet<&String> = metric_names.iter().collect();
        if uniq.len() != metric_names.len() {
            return Err(AnalysisError::Invalid("duplicate metric names".into()));
        }
        if !metric_names.iter().any(|m| m == reference_metric) {
            return Err(AnalysisError::NoReference(reference_metric.to_string()));
        }
        Ok(Self {
            models,
            metric_names,
            values,
            reference_metric: reference_metric.to_string(),
        })
    }

    /// Reads `model_id,group_label,<metric>...`; empty cells are missing.
    pub fn from_csv(reader: impl Read, reference_metric: &str) -> Result<Self, AnalysisError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| AnalysisError::Format {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if header.get(0) != Some("model_id") || header.get(1) != Some("group_label") {
            return Err(AnalysisError::Format {
                line: 1,
                message: "header must start with model_id,group_label".into(),
            });
        }
        let metric_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut models = Vec::new();
        let mut values = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let fail = |message: String| AnalysisError::Format { line, message };
            let rec = rec.map_err(|e| fail(e.to_string()))?;
            let id = rec[0].to_string();
            if !ids.insert(id.clone()) {
                return Err(fail(format!("duplicate model_id {id}")));
            }
            models.push(ModelInfo {
                model_id: id,
                group_label: rec[1].to_string(),
            });
            let row = rec
                .iter()
                .skip(2)
                .map(|c| {
                    if c.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        c.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| fail(format!("bad value '{c}'")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            values.push(row);
        }
        Self::new(models, metric_names, values, reference_metric)
    }

    pub fn load(path: &Path, reference_metric: &str) -> Result<Self, AnalysisError> {
        let f = std::fs::File::open(path).map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(f, reference_metric)
    }

    pub fn metric_index(&self, name: &str) -> Result<usize, AnalysisError> {
        self.metric_names
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| AnalysisError::UnknownMetric(name.to_string()))
    }

    /// A complete column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, AnalysisError> {
        let j = self.metric_index(name)?;
        let col: Vec<f64> = self.values.iter().map(|r| r[j]).collect();
        if col.iter().any(|v| v.is_nan()) {
            return Err(AnalysisError::MissingValues(name.to_string()));
        }
        Ok(col)
    }

    pub fn reference(&self) -> Result<Vec<f64>, AnalysisError> {
        self.column(&self.reference_metric)
    }

    /// Group index per model, indices following sorted label order.
    pub fn group_indices(&self) -> (Vec<String>, Vec<usize>) {
        let labels: Vec<String> = self
            .models
            .iter()
            .map(|m| m.group_label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let idx = self
            .models
            .iter()
            .map(|m| labels.binary_search(&m.group_label).unwrap())
            .collect();
        (labels, idx)
    }

    /// Every metric other than the reference.
    pub fn non_reference_metrics(&self) -> Vec<String> {
        self.metric_names
            .iter()
            .filter(|m| **m != self.reference_metric)
            .cloned()
            .collect()
    }
}

fn stats_err(context: impl Into<String>) -> impl FnOnce(StatsError) -> AnalysisError {
    let context = context.into();
    move |source| AnalysisError::Stats { context, source }
}

/// Symmetric correlation matrix; `None` where a coefficient is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    /// Header row of names, then one row per metric; undefined cells empty.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "metric,{}", self.names.join(","))?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| v.map(|x| format!("{x}")).unwrap_or_default()).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Pairwise Spearman correlations with average ranks for ties. Pairs
/// involving a constant column are `None`; the diagonal is 1.
pub fn spearman_matrix(table: &MetricsTable, metrics: &[&str]) -> Result<CorrelationMatrix, AnalysisError> {
    if table.models.len() < 3 {
        return Err(AnalysisError::TooFew {
            what: "models",
            needed: 3,
            got: table.models.len(),
        });
    }
    let cols = metrics
        .iter()
        .map(|m| table.column(m))
        .collect::<Result<Vec<_>, _>>()?;
    let ranks: Vec<Vec<f64>> = cols.iter().map(|c| stats::average_ranks(c)).collect();
    let n = metrics.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        values[i][i] = Some(1.0);
        for j in i + 1..n {
            let r = stats::pearson(&ranks[i], &ranks[j]).ok();
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: metrics.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

/// Pearson correlation of two columns.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    stats::pearson(x, y).map_err(stats_err("pearson"))
}

/// Residuals of the least-squares fit `y ~ a + b·x`.
///
/// One refinement pass re-fits the residuals so they stay orthogonal to both
/// the intercept and `x` to rounding precision.
pub fn ols_residuals(x: &[f64], y: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::Invalid("length mismatch".into()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFew {
            what: "models",
            needed: 2,
            got: x.len(),
        });
    }
    let mx = stats::mean(x);
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let sxx: f64 = xc.iter().map(|v| v * v).sum();
    if sxx == 0.0 || xc.iter().all(|v| *v == 0.0) {
        return Err(AnalysisError::ConstantReference);
    }
    let fit = |ys: &[f64]| -> Vec<f64> {
        let my = stats::mean(ys);
        let b = xc.iter().zip(ys).map(|(a, y)| a * (y - my)).sum::<f64>() / sxx;
        ys.iter().zip(&xc).map(|(y, a)| (y - my) - b * a).collect()
    };
    let r = fit(y);
    Ok(fit(&r))
}

/// Residual of `metric` after regressing it on the reference metric.
pub fn residualize(table: &MetricsTable, metric: &str) -> Result<Vec<f64>, AnalysisError> {
    if metric == table.reference_metric {
        return Err(AnalysisError::IsReference(metric.to_string()));
    }
    ols_residuals(&table.reference()?, &table.column(metric)?)
}

/// Pearson correlation between the residual robustness score (mean of the
/// robustness metrics minus the reference metric) and a transfer metric.
pub fn residual_robustness_correlation(
    table: &MetricsTable,
    robustness_metrics: &[&str],
    transfer_metric: &str,
) -> Result<f64, AnalysisError> {
    if robustness_metrics.is_empty() {
        return Err(AnalysisError::TooFew {
            what: "robustness metrics",
            needed: 1,
            got: 0,
        });
    }
    let reference = table.reference()?;
    let cols = robustness_metrics
        .iter()
        .map(|m| table.column(m))
        .collect::<Result<Vec<_>, _>>()?;
    let score: Vec<f64> = (0..reference.len())
        .map(|i| cols.iter().map(|c| c[i]).sum::<f64>() / cols.len() as f64 - reference[i])
        .collect();
    let transfer = table.column(transfer_metric)?;
    stats::pearson(&score, &transfer).map_err(stats_err("residual robustness correlation"))
}
