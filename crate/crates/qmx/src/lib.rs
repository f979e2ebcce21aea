//! Command-line harness: configuration, orchestration and JSON reports for
//! the qmx-core verification suites.

pub mod cli;
pub mod config;
pub mod golden;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use report::Report;
pub use run::{execute, Command, Hooks, Target};
