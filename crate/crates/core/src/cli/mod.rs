//! Config-driven runs behind the `chaos-ldp` binary.

pub mod config;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use run::{run_config, ErrorReport, Overrides, RunOutcome};
