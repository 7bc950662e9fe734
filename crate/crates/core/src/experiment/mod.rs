//! Config-driven experiments and their reports.

pub mod config;
pub mod run;

pub use config::{
    ExperimentConfig, ExperimentKind, GridSection, ModelSection, PullbackSection, PullbackSource, SolverSection,
    TaylorSection, VerifySection, CONFIG_SCHEMA,
};
pub use run::{resolve_out, run_experiment, Check, RunOptions, RunReport};
