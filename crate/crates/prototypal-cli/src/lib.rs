//! Dataset loading, model persistence, reports and the command-line driver
//! for the [`prototypal`] crate.
//!
//! The split follows the crate boundary: everything algorithmic lives in
//! `prototypal` (which is `no_std`-compatible); everything that touches the
//! filesystem, CSV/JSON formats, SVG rendering or process exit codes lives
//! here.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod data;
pub mod error;
pub mod model_file;
pub mod report;
pub mod run;
pub mod schema;

pub use error::{CliError, Result};
