//! Scenario files, runners and output writers behind the `cavbeat` binary.

pub mod error;
pub mod output;
pub mod runner;
pub mod scenario;

pub use error::AppError;
pub use runner::{run_preset, run_scenario, run_sweep, run_validation, Preset, RunOptions, RunOutcome};
pub use scenario::{Mode, Scenario, SweepParam};
