//! Density clustering and penalized regression for multi-factor panel data.
//!
//! The crate resolves multicollinearity among many related regressors by
//! clustering entities on their normalized feature profiles (DBSCAN),
//! aggregating the panel by cluster, and fitting ridge, lasso and elastic-net
//! models on the log-scale cluster totals.
//!
//! Module map:
//!
//! - [`dataio`]: CSV panel ingestion, validation, JSON reports.
//! - [`preprocess`]: zero-series removal, row min-max scaling, log transform.
//! - [`clustering`]: DBSCAN, silhouette, within-cluster SSE, parameter sweep.
//! - [`regression`]: OLS/ridge closed form, coordinate-descent lasso and
//!   elastic net, KKT checks, cross-validation and regularization paths.
//! - [`pipeline`]: the end-to-end workflow and its configuration.
//! - [`synthetic`]: seeded generator of panels with planted structure.

pub mod clustering;
pub mod dataio;
mod error;
pub mod pipeline;
pub mod preprocess;
pub mod regression;
pub mod synthetic;

pub use error::{Error, Result};

pub use clustering::{ClusterAssignment, ClusteringQuality, NeighborhoodParams, SilhouetteReport};
pub use dataio::{EnergyPanel, Layout, ValidationReport};
pub use pipeline::{PipelineConfig, PipelineReport};
pub use preprocess::FeatureMatrix;
pub use regression::{DesignMatrix, FitReport, LinearModel, PathReport, PenaltyKind, PenaltySpec, SolverOptions};
