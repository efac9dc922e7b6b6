//! Synthetic robustness-dataset generation and robustness metric analysis.
//!
//! The crate is organised bottom-up:
//!
//! - [`catalog`] ingests foreground cut-outs and backgrounds into an
//!   [`catalog::AssetManifest`].
//! - [`compositor`] scales, rotates, places and alpha-blends one object onto
//!   one background and measures how much of it stays on the canvas.
//! - [`sweep`] expands size/location/rotation sweeps into a rendered dataset
//!   with per-image ground truth.
//! - [`metrics`] scores prediction files against a dataset: accuracy, pm-k,
//!   mCE, relative error reduction, location heatmaps and factor profiles.
//! - [`meta`] runs the statistics over a models × metrics table: rank
//!   correlations, residual analysis, group discriminability and residual PCA.

pub mod catalog;
pub mod compositor;
pub mod io;
pub mod meta;
pub mod metrics;
pub mod raster;
pub mod seeding;
pub mod stats;
pub mod sweep;

pub use catalog::{AssetManifest, BackgroundAsset, ForegroundAsset};
pub use compositor::{CompositeResult, Placement};
pub use meta::MetricsTable;
pub use metrics::{FactorProfile, FrameGroup, Grid, PredictionSet};
pub use sweep::{DatasetManifest, SampleRecord, SweepConfig};
