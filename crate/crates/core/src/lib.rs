//! Interrater agreement over sentiment-annotation matrices.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: annotation matrices, survey ingestion and synthetic cohorts.
//! - [`agreement`]: Fleiss' kappa.
//! - [`mc`]: the Monte Carlo rater-subset experiment and per-subset summaries.
//! - [`minfit`]: the rational minimum-agreement model and its staged fit.
//! - [`dispersion`]: running means over random teams, coefficients of
//!   variation and empirical-rule interval estimates.
//! - [`formats`]: the comma-separated file formats shared with the CLI.

pub mod agreement;
pub mod corpus;
pub mod dispersion;
pub mod error;
pub mod formats;
pub mod mc;
pub mod minfit;
mod rng;
pub mod stats;

pub use agreement::{fleiss_kappa, fleiss_kappa_subset, CategoryCounts, KappaValue};
pub use corpus::{AnnotationMatrix, ColumnMapping, Label, PreprocessReport, RawSurveyTable};
pub use dispersion::{IntervalEstimate, Level, VariationConfig, VariationRow, VariationTable};
pub use error::{Error, Result};
pub use mc::{ExperimentConfig, RunRecord, RunSet, SubsetRow, SubsetStats, TeamSelection};
pub use minfit::{MinPoints, ModelFit, Regressor, Regressors, Stage};
