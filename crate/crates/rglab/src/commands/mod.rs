//! Subcommand implementations. Each `compute_*` function is pure given its
//! configuration; the matching `run_*` function writes files.

mod asymptotic;
mod figure1;
mod figure2;
mod independence;
mod sample_size;

use std::path::PathBuf;

use serde_json::Value;

pub use asymptotic::{compute_asymptotic_cov, run_asymptotic_cov};
pub use figure1::{compute_figure1, run_figure1, Figure1Result};
pub use figure2::{compute_figure2, run_figure2};
pub use independence::{check_independence, IndependenceReport};
pub use sample_size::{compute_sample_size, run_sample_size};

use crate::config::Workers;
use crate::error::CliError;

/// What a file-producing command hands back to the caller.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// The summary document, also printed with `--json`.
    pub summary: Value,
}

/// Runs `f` inside a rayon pool of the requested size.
pub fn with_workers<T: Send>(workers: Workers, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.threads())
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    log::debug!("worker pool with {} threads", pool.current_num_threads());
    Ok(pool.install(f))
}
