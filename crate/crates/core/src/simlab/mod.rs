//! Simulated clustering benchmarks and misclassification metrics.

mod experiment;
mod generate;
mod metrics;

pub use experiment::{mean_ci, run_experiment, ExperimentResult, ExperimentSettings, RepFailure, RepRow, RunSummary};
pub use generate::{generate, Family, LabeledSample, ScenarioC, Size};
pub use metrics::{min_misclassification, misclassification_indexed, misclassification_rate};
