//! Experiment runner for the Mann iteration: TOML configs, single runs,
//! parameter sweeps, re-audits of stored trajectories, and report rendering.
//!
//! Exit codes: 0 when every auditor passes, 2 when any fails, 3 when some
//! hypothesis is not met and nothing fails, 1 on configuration or I/O errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;

pub use commands::{cmd_audit, cmd_report, cmd_run, cmd_sweep, Overrides};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::{AuditSummary, Experiment, Outcome};
