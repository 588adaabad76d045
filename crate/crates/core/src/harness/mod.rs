//! Experiment drivers: configuration, initial data, single runs and limit studies.

pub mod config;
pub mod initial;
pub mod study;
pub mod validate;

pub use config::{ExperimentConfig, IcMode, Shape, Window};
pub use initial::{build_initial_data, prepare, InitialData};
pub use study::{run_limit_study, IllComparison, MetricFit, RunFailure, RunSummary, StudyReport};
