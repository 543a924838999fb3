//! File formats, configuration and commands behind the `canoa` binary.

pub mod bundlefile;
pub mod commands;
pub mod config;
pub mod error;
pub mod groundtruth;
pub mod report;
pub mod tracefile;

pub use bundlefile::{BundleFile, BundleMeta};
pub use config::{Preset, RunConfig};
pub use error::CliError;
pub use report::{OutputFormat, Table};
pub use tracefile::{TraceFile, TraceKind};
