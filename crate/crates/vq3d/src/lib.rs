//! File formats, IO and the `vq3d` command-line tool on top of `vq3d-core`.
//!
//! - [`model_io`]: reconstruction model files, text and binary.
//! - [`formats`]: pose, query, result, depth-grid, PGM and blur-score files.
//! - [`report`]: evaluation, registration and sweep reports.
//! - [`config`]: the TOML pipeline config.
//! - [`ops`]: one function per verb.
//! - [`cli`]: argument parsing and exit codes.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod model_io;
pub mod ops;
pub mod report;

pub use error::{Error, Location, Result};
