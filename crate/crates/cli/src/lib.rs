//! Configuration, experiment runner and verification battery for
//! `triharm-core`.

pub mod config;
pub mod profiles;
pub mod run;
pub mod suite;

pub use config::{parse_config, ConfigError, ExperimentSpec};
pub use run::{run_experiment, RunError, RunOutcome};
pub use suite::{verify_suite, Hooks, SuiteReport};

/// Environment variable that overrides the default seed of `verify`.
pub const SEED_ENV: &str = "TRIHARM_SEED";
