//! Scenario files, subcommand runners and CSV output for the
//! `fleet-inverse` binary.

pub mod error;
pub mod run;
pub mod scenario;

pub use error::{Category, CliError};
pub use scenario::{parse_scenario, parse_str, Scenario, ScenarioFile};
