//! Configuration, orchestration, reports and parallel ensembles for
//! [`shrinktarget_core`].

pub mod config;
pub mod experiment;
pub mod output;
pub mod parallel;
pub mod report;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, Outcome};
