//! File formats, configuration and the `ptoffset` command-line tool built
//! on [`ptoffset_core`].
//!
//! - [`formats`]: OBJ, ASCII PLY (with an optional `anomaly_score`
//!   channel) and per-point CSV tables.
//! - [`checkpoint`]: lossless text checkpoints and loss histories.
//! - [`config`]: the TOML run configuration.
//! - [`files`]: atomic writes, benchmark directories and run manifests.
//! - [`cli`]: argument parsing and the subcommand pipelines.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod formats;

pub use error::{Error, Result};
pub use ptoffset_core as core;
