//! Configuration, experiment orchestration and CSV output.

pub mod config;
pub mod csv;
pub mod study;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use study::{
    compute_convergence_study, run_convergence_study, run_tube_study, summary_from_csv, OffsetSummary, StudyError,
    StudyOutput, TrialRow, TubeStudyConfig,
};
