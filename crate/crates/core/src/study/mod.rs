//! Study orchestration: strain records, configuration, synthetic data and
//! the end-to-end pipeline behind the CLI.

pub mod config;
mod pipeline;
mod series;
pub mod synthetic;

pub use config::StudyConfig;
pub use pipeline::{
    AssessTarget, CandidateConvergence, MapEntry, PredictiveSummary, Study, StudyReport, SurrogatePair,
    TaskConvergence, TaskPredictive,
};
pub use series::{split_phases, split_train_forecast, StrainSeries, CSV_HEADER};
pub use synthetic::generate_synthetic;
