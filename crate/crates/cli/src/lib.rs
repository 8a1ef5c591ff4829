//! Configuration, orchestration, persistence and reporting for `polymer-ldp-core` experiments.

pub mod config;
pub mod record;
pub mod report;
pub mod run;

pub use config::{derive_seed, Experiment, ExperimentConfig, LambdaSource, Method};
pub use record::Record;
pub use run::{execute, run, RunManifest, RunOutput, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error(transparent)]
    Core(#[from] polymer_ldp_core::Error),

    #[error("malformed results line {line}: {source}")]
    Results {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("table output failed: {0}")]
    Table(#[from] csv::Error),
}
