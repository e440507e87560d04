//! Configuration parsing, command execution and CSV output for the coupled
//! acoustic/thermal solver.

pub mod config;
pub mod run;

pub use config::{config_digest, parse_config, serialize, Config, ConfigError, StudyConfig};
pub use run::{run_scenario, Command, RunOptions, RunResult, EXIT_CONFIG, EXIT_DEGENERACY, EXIT_OK, EXIT_SOLVER};
