//! Cross-validated evaluation: fold planning, the experiment pipeline,
//! reports and flat key=value configuration files.

mod config;
mod experiment;
mod folds;
mod report;

pub use config::{config_args, parse_config};
pub use experiment::{
    derive_seed, experiment_grid, oversample_training, prepare, run_experiment, run_prepared, DataPaths,
    ExperimentConfig, ExperimentData, Prepared, Representation, SentimentMode, SourceMode, TrainingSet,
};
pub use folds::{stratified_kfold, FoldPlan};
pub use report::{emit_report, EvalReport, FoldResult, ReportFormat, Timing};
