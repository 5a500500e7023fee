//! Experiment runner: parameter sweeps, oracle scans and reconstructions,
//! written as CSV, JSONL and JSON files.

pub mod config;
pub mod reconstruct;
pub mod scan;
pub mod sweep;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Preset, StateSource};
pub use reconstruct::{run_reconstruct, ReconstructSummary};
pub use scan::{parse_grid, run_oracle_scan, scan_header, scan_row};
pub use sweep::{run_sweep, SweepOutput, SweepRow, SWEEP_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bures_core::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown preset {0:?} (expected werner, cluster or smolin)")]
    Preset(String),
    #[error("invalid grid {0:?}: {1}")]
    Grid(String, String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Command-line overrides shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Divide epochs and restarts by 10 (at least 1 each).
    pub fast: bool,
    pub out_dir: PathBuf,
}

fn create_file(path: &std::path::Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })?;
    }
    std::fs::File::create(path).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}
