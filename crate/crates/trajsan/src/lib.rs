//! File formats, reports, and the `trajsan` command line on top of
//! `trajsan-core`.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
