use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use si_forge_core::meta::{
    discriminability_sweep, residual_pca, residual_robustness_correlation, spearman_matrix, CorrelationMatrix,
    DiscriminabilityConfig, DiscriminabilityResult, ResidualPcaConfig,
};
use si_forge_core::MetricsTable;

use crate::error::{CliError, CliResult};
use crate::output::{report_json, require_file, write, Provenance};
use crate::{resolve_seed, split_list, with_jobs};

pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const DEFAULT_PERMUTATIONS: usize = 1000;
pub const DEFAULT_COMPONENTS: usize = 5;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Metrics table CSV: model_id,group_label,<metric>...
    #[arg(long)]
    pub table: PathBuf,
    /// Column every other metric is compared against.
    #[arg(long)]
    pub reference: String,
    /// Comma-separated metrics to analyze; defaults to every non-reference column.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Spearman correlation matrix of the metrics and the reference.
    #[arg(long)]
    pub spearman: bool,
    /// Group-classifier accuracy gain per metric (and pair, with --max-extras 2).
    #[arg(long)]
    pub discriminability: bool,
    /// PCA of reference-residualized metrics against a permutation null.
    #[arg(long)]
    pub pca: bool,
    /// Pearson correlation of the residual robustness score with --transfer.
    #[arg(long)]
    pub residual_correlation: bool,
    /// Comma-separated robustness metrics for --residual-correlation.
    #[arg(long)]
    pub robustness: Option<String>,
    /// Transfer metric for --residual-correlation.
    #[arg(long)]
    pub transfer: Option<String>,
    /// Bootstrap resamples for discriminability and PCA intervals.
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// Permutations for the PCA null bands.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    /// PCA components to report; capped at the number of metrics.
    #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
    pub components: usize,
    /// Largest feature set added to the reference: 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub max_extras: usize,
    /// Base seed; falls back to SI_FORGE_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for the JSON and CSV results.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SpearmanReport<'a> {
    analysis: &'static str,
    reference_metric: &'a str,
    matrix: &'a CorrelationMatrix,
}

#[derive(Serialize)]
struct CorrelationReport<'a> {
    analysis: &'static str,
    reference_metric: &'a str,
    robustness_metrics: &'a [String],
    transfer_metric: &'a str,
    pearson: f64,
}

pub fn discriminability_csv(r: &DiscriminabilityResult) -> Vec<u8> {
    let mut rows: Vec<_> = r.entries.iter().collect();
    rows.sort_by(|a, b| {
        b.mean_delta
            .total_cmp(&a.mean_delta)
            .then_with(|| a.feature_set.cmp(&b.feature_set))
    });
    let mut s = String::from("feature_set,mean_delta,sd_delta,mean_reference_accuracy,mean_augmented_accuracy,bootstrap_n\n");
    for e in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.feature_set.join("+"),
            e.mean_delta,
            e.sd_delta,
            e.mean_reference_accuracy,
            e.mean_augmented_accuracy,
            e.bootstrap_n
        ));
    }
    s.into_bytes()
}

pub fn run(a: AnalyzeArgs) -> CliResult<()> {
    if !(a.spearman || a.discriminability || a.pca || a.residual_correlation) {
        return Err(CliError::usage(
            "choose at least one of --spearman, --discriminability, --pca, --residual-correlation",
        ));
    }
    let table_path = require_file(&a.table)?;
    let table = MetricsTable::load(&table_path, &a.reference)?;
    let names: Vec<String> = match &a.metrics {
        Some(m) => split_list(m),
        None => table.non_reference_metrics(),
    };
    let metrics: Vec<&str> = names.iter().map(String::as_str).collect();
    if metrics.is_empty() {
        return Err(CliError::usage("no metrics to analyze"));
    }
    let seed = resolve_seed(a.seed, None)?;
    let prov = Provenance::new("analyze", Some(seed), &[&table_path])?;

    if a.spearman {
        let mut cols = vec![a.reference.as_str()];
        cols.extend(metrics.iter().filter(|m| **m != a.reference));
        let m = spearman_matrix(&table, &cols)?;
        let mut csv = Vec::new();
        m.write_csv(&mut csv).map_err(|e| CliError::internal(e.to_string()))?;
        write(&a.out.join("spearman.csv"), &csv)?;
        let body = SpearmanReport {
            analysis: "spearman",
            reference_metric: &a.reference,
            matrix: &m,
        };
        write(&a.out.join("spearman.json"), &report_json(&prov, &body)?)?;
    }
    if a.discriminability {
        if a.bootstrap == 0 {
            return Err(CliError::usage("--bootstrap must be at least 1"));
        }
        let cfg = DiscriminabilityConfig::new(a.bootstrap, seed);
        let r = with_jobs(a.jobs, || discriminability_sweep(&table, &metrics, a.max_extras, &cfg))??;
        write(&a.out.join("discriminability.csv"), &discriminability_csv(&r))?;
        write(&a.out.join("discriminability.json"), &report_json(&prov, &r)?)?;
    }
    if a.pca {
        if a.bootstrap == 0 || a.permutations == 0 {
            return Err(CliError::usage("--bootstrap and --permutations must be at least 1"));
        }
        let cfg = ResidualPcaConfig {
            n_components: a.components.min(metrics.len()),
            permutations: a.permutations,
            bootstrap_n: a.bootstrap,
            seed,
        };
        let r = with_jobs(a.jobs, || residual_pca(&table, &metrics, &cfg))??;
        write(&a.out.join("pca.json"), &report_json(&prov, &r)?)?;
    }
    if a.residual_correlation {
        let robustness = split_list(
            a.robustness
                .as_deref()
                .ok_or_else(|| CliError::usage("--residual-correlation needs --robustness"))?,
        );
        let transfer = a
            .transfer
            .as_deref()
            .ok_or_else(|| CliError::usage("--residual-correlation needs --transfer"))?;
        let refs: Vec<&str> = robustness.iter().map(String::as_str).collect();
        let rho = residual_robustness_correlation(&table, &refs, transfer)?;
        let body = CorrelationReport {
            analysis: "residual_robustness_correlation",
            reference_metric: &a.reference,
            robustness_metrics: &robustness,
            transfer_metric: transfer,
            pearson: rho,
        };
        write(&a.out.join("residual_correlation.json"), &report_json(&prov, &body)?)?;
    }
    Ok(())
}
