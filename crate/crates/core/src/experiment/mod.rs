//! Batch front end: experiment documents, snapshots, CSV ledgers and the
//! scenario runner behind the `hpe2d` binary.

pub mod config;
pub mod ledger_csv;
pub mod runner;
pub mod snapshot;

pub use config::{load_config, parse_config, ExperimentConfig, Scenario};
pub use ledger_csv::{load_ledger, save_ledger};
pub use runner::{run_experiment, verify_ledger, Outcome, Report, Verification};
pub use snapshot::{load_snapshot, load_snapshot_for, save_snapshot};
