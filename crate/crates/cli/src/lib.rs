//! Command-line harness around `rdv-core`: scenario loading, single and batch
//! runs, plot data, and the acceptance suite.

pub mod accept;
pub mod commands;
pub mod diag;
pub mod scenarios;

pub use diag::CliError;
