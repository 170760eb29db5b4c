//! Experiment drivers behind the `ltm-lab` binary.

pub mod config;
pub mod error;
pub mod fig3;
pub mod output;
pub mod run;
pub mod swap;

pub use config::{parse_grid, ExperimentConfig, ResolvedExperiment};
pub use error::{CliError, CliResult};
pub use fig3::{run_fig3, Fig3Options, Fig3Result};
pub use run::{run_config_file, run_generic, RunOutput, RunRow, RunSummary};
pub use swap::{run_swap_example, SwapOptions, SwapReport};
