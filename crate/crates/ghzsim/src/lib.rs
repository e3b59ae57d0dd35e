//! File formats, configuration, the persistent branch cache and the
//! commands behind the `ghzsim` binary.

use std::path::{Path, PathBuf};

use ghzsim_core::AnalysisError;
use thiserror::Error;

pub mod cache;
pub mod checks;
pub mod commands;
pub mod config;
pub mod netlist_file;
pub mod output;
pub mod runner;

pub use cache::{BranchCache, CacheStats};
pub use config::{GridSpec, PointSpec, RunConfig};
pub use runner::Parallel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("netlist: {0}")]
    Netlist(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cache: {0}")]
    Cache(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("thread pool: {0}")]
    Threads(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}
