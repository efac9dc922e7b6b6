use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use si_forge_core::metrics::{
    anchor_accuracy, delta_map, error_reduction_grid, factor_profile, location_heatmap, mean_corruption_error,
    normalize_best, normalize_p95, pm_k_accuracy, read_corruption_csv, relative_error_reduction, top1_accuracy,
    Factor, FactorProfile, FrameGroup, Grid, PredictionSet,
};
use si_forge_core::DatasetManifest;

use crate::error::{CliError, CliResult};
use crate::generate::manifest_path;
use crate::output::{emit, report_json, require_file, write, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// Top-1 accuracy over a dataset manifest.
    Top1,
    /// Top-1 accuracy on frame-group anchors.
    Anchor,
    /// Anchor and all frames within distance k correct.
    PmK,
    /// Mean corruption error against a baseline model.
    Mce,
    /// Relative error reduction against a baseline accuracy.
    Rer,
    /// 21×21 accuracy grid over object locations.
    LocationHeatmap,
    /// Accuracy per value of one factor.
    Profile,
    /// Cell-wise difference of two grid or profile reports.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeRule {
    None,
    /// Divide by the 95th percentile of supported cells (heatmaps).
    P95,
    /// Divide by the best supported bin (profiles).
    Best,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// Predictions CSV: image_id,rank1[,rank2,...].
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Dataset manifest.jsonl or its directory.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Frame groups JSONL.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Neighbour distance for pm-k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Model corruption errors: corruption,severity,error.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Baseline corruption errors, same layout as --errors.
    #[arg(long)]
    pub baseline_errors: Option<PathBuf>,
    /// Baseline accuracy for rer, in [0, 1].
    #[arg(long)]
    pub baseline_accuracy: Option<f64>,
    /// Model accuracy for rer, in [0, 1].
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Headerless accuracy matrix CSV for a grid of error reductions.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Factor for --metric profile: size, x, y or rotation.
    #[arg(long, value_parser = parse_factor)]
    pub factor: Option<Factor>,
    /// Normalization for heatmaps and profiles.
    #[arg(long, value_enum, default_value_t = NormalizeRule::None)]
    pub normalize: NormalizeRule,
    /// Reference report for --metric delta (the subtrahend).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Report compared against --reference.
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// JSON report path; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the grid or profile as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_factor(s: &str) -> Result<Factor, String> {
    s.parse()
}

fn need<'a, T>(v: &'a Option<T>, flag: &str, metric: &str) -> CliResult<&'a T> {
    v.as_ref()
        .ok_or_else(|| CliError::usage(format!("--metric {metric} needs {flag}")))
}

#[derive(Serialize)]
struct Scalar<'a> {
    metric: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    value: f64,
}

#[derive(Serialize)]
struct GridReport<'a> {
    metric: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_id: Option<&'a str>,
    grid: &'a Grid,
}

#[derive(Serialize)]
struct ProfileReport<'a> {
    metric: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_id: Option<&'a str>,
    profile: &'a FactorProfile,
}

fn load_predictions(path: &Path) -> CliResult<PredictionSet> {
    Ok(PredictionSet::load(&require_file(path)?)?)
}

fn load_dataset(path: &Path) -> CliResult<(PathBuf, DatasetManifest)> {
    let p = require_file(&manifest_path(path))?;
    let m = DatasetManifest::load(&p)?;
    Ok((p, m))
}

pub fn profile_csv(p: &FactorProfile) -> Vec<u8> {
    let mut s = format!("{},accuracy,support\n", p.factor_name);
    for ((b, a), n) in p.bins.iter().zip(&p.accuracy).zip(&p.support) {
        s.push_str(&format!("{b},{},{n}\n", a.map(|v| v.to_string()).unwrap_or_default()));
    }
    s.into_bytes()
}

/// A grid or profile pulled back out of an `evaluate` JSON report.
pub enum Cellular {
    Grid(Grid),
    Profile(FactorProfile),
}

pub fn read_cellular(path: &Path) -> CliResult<Cellular> {
    let bytes = fs::read(require_file(path)?).map_err(|e| CliError::data("io", format!("{}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::data("report", format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::data("report", format!("{}: {e}", path.display()));
    if let Some(g) = v.get("grid") {
        Ok(Cellular::Grid(serde_json::from_value(g.clone()).map_err(bad)?))
    } else if let Some(p) = v.get("profile") {
        Ok(Cellular::Profile(serde_json::from_value(p.clone()).map_err(bad)?))
    } else {
        Err(CliError::data(
            "report",
            format!("{}: no grid or profile in report", path.display()),
        ))
    }
}

pub fn run(a: EvaluateArgs) -> CliResult<()> {
    let name = a.metric.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut inputs: Vec<PathBuf> = Vec::new();
    let body: Vec<u8>;
    let prov_for = |inputs: &[PathBuf]| {
        let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
        Provenance::new(&format!("evaluate {name}"), None, &refs)
    };
    match a.metric {
        Metric::Top1 => {
            let preds = load_predictions(need(&a.predictions, "--predictions", &name)?)?;
            let (mp, m) = load_dataset(need(&a.manifest, "--manifest", &name)?)?;
            inputs.extend([a.predictions.clone().unwrap(), mp]);
            let value = top1_accuracy(&preds, &m)?;
            body = report_json(&prov_for(&inputs)?, &Scalar {
                metric: &name,
                model_id: Some(&preds.model_id),
                k: None,
                value,
            })?;
        }
        Metric::Anchor | Metric::PmK => {
            let preds = load_predictions(need(&a.predictions, "--predictions", &name)?)?;
            let gp = require_file(need(&a.groups, "--groups", &name)?)?;
            let groups = FrameGroup::load(&gp)?;
            inputs.extend([a.predictions.clone().unwrap(), gp]);
            let (value, k) = if a.metric == Metric::Anchor {
                (anchor_accuracy(&preds, &groups)?, None)
            } else {
                let k = *need(&a.k, "--k", &name)?;
                (pm_k_accuracy(&preds, &groups, k)?, Some(k))
            };
            body = report_json(&prov_for(&inputs)?, &Scalar {
                metric: &name,
                model_id: Some(&preds.model_id),
                k,
                value,
            })?;
        }
        Metric::Mce => {
            let ep = require_file(need(&a.errors, "--errors", &name)?)?;
            let bp = require_file(need(&a.baseline_errors, "--baseline-errors", &name)?)?;
            let open = |p: &Path| fs::File::open(p).map_err(|e| CliError::data("io", format!("{}: {e}", p.display())));
            let model = read_corruption_csv(open(&ep)?)?;
            let base = read_corruption_csv(open(&bp)?)?;
            let value = mean_corruption_error(&model, &base)?;
            inputs.extend([ep, bp]);
            body = report_json(&prov_for(&inputs)?, &Scalar {
                metric: &name,
                model_id: None,
                k: None,
                value,
            })?;
        }
        Metric::Rer => {
            let base = *need(&a.baseline_accuracy, "--baseline-accuracy", &name)?;
            match (&a.accuracy, &a.grid) {
                (Some(acc), None) => {
                    let value = relative_error_reduction(1.0 - base, 1.0 - acc)?;
                    body = report_json(&prov_for(&inputs)?, &Scalar {
                        metric: &name,
                        model_id: None,
                        k: None,
                        value,
                    })?;
                }
                (None, Some(gp)) => {
                    let gp = require_file(gp)?;
                    let f = fs::File::open(&gp).map_err(|e| CliError::data("io", format!("{}: {e}", gp.display())))?;
                    let grid = error_reduction_grid(base, &Grid::read_csv(f)?)?;
                    inputs.push(gp);
                    if let Some(c) = &a.csv {
                        write(c, &grid.to_csv())?;
                    }
                    body = report_json(&prov_for(&inputs)?, &GridReport {
                        metric: &name,
                        model_id: None,
                        grid: &grid,
                    })?;
                }
                _ => return Err(CliError::usage("--metric rer needs exactly one of --accuracy or --grid")),
            }
        }
        Metric::LocationHeatmap => {
            let preds = load_predictions(need(&a.predictions, "--predictions", &name)?)?;
            let (mp, m) = load_dataset(need(&a.manifest, "--manifest", &name)?)?;
            inputs.extend([a.predictions.clone().unwrap(), mp]);
            let mut grid = location_heatmap(&preds, &m)?;
            match a.normalize {
                NormalizeRule::None => {}
                NormalizeRule::P95 => grid = normalize_p95(&grid)?,
                NormalizeRule::Best => return Err(CliError::usage("heatmaps normalize with p95, not best")),
            }
            if let Some(c) = &a.csv {
                write(c, &grid.to_csv())?;
            }
            body = report_json(&prov_for(&inputs)?, &GridReport {
                metric: &name,
                model_id: Some(&preds.model_id),
                grid: &grid,
            })?;
        }
        Metric::Profile => {
            let preds = load_predictions(need(&a.predictions, "--predictions", &name)?)?;
            let (mp, m) = load_dataset(need(&a.manifest, "--manifest", &name)?)?;
            let factor = *need(&a.factor, "--factor", &name)?;
            inputs.extend([a.predictions.clone().unwrap(), mp]);
            let mut profile = factor_profile(&preds, &m, factor)?;
            match a.normalize {
                NormalizeRule::None => {}
                NormalizeRule::Best => profile = normalize_best(&profile)?,
                NormalizeRule::P95 => return Err(CliError::usage("profiles normalize with best, not p95")),
            }
            if let Some(c) = &a.csv {
                write(c, &profile_csv(&profile))?;
            }
            body = report_json(&prov_for(&inputs)?, &ProfileReport {
                metric: &name,
                model_id: Some(&preds.model_id),
                profile: &profile,
            })?;
        }
        Metric::Delta => {
            let rp = need(&a.reference, "--reference", &name)?.clone();
            let op = need(&a.other, "--other", &name)?.clone();
            let (r, o) = (read_cellular(&rp)?, read_cellular(&op)?);
            inputs.extend([rp, op]);
            let prov = prov_for(&inputs)?;
            body = match (r, o) {
                (Cellular::Grid(r), Cellular::Grid(o)) => {
                    let d = delta_map(&r, &o)?;
                    if let Some(c) = &a.csv {
                        write(c, &d.to_csv())?;
                    }
                    report_json(&prov, &GridReport {
                        metric: &name,
                        model_id: None,
                        grid: &d,
                    })?
                }
                (Cellular::Profile(r), Cellular::Profile(o)) => {
                    let d = delta_map(&r, &o)?;
                    if let Some(c) = &a.csv {
                        write(c, &profile_csv(&d))?;
                    }
                    report_json(&prov, &ProfileReport {
                        metric: &name,
                        model_id: None,
                        profile: &d,
                    })?
                }
                _ => return Err(CliError::data("report", "delta needs two grids or two profiles")),
            };
        }
    }
    emit(a.out.as_deref(), &body)
}
