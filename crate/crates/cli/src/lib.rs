//! Batch front end for quench simulations: configuration parsing, scenario
//! runs, refinement sweeps and reproducible CSV/JSON output.

pub mod config;
pub mod error;
pub mod run;
pub mod summary;
pub mod sweep;

pub use config::{parse_config, RunConfig, Scenario};
pub use error::{ConfigError, RunError};
pub use run::{execute, run, run_verify, verify, RunOutput};
pub use summary::RunSummary;
pub use sweep::{sweep, Axis, SweepReport};
