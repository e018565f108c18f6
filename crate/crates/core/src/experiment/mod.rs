//! Config-driven experiment runs.

mod config;
mod runner;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{
    config_from_pairs, validate_config, DatasetSource, ExperimentConfig, ModelSpec,
    DEFAULT_OUTPUT_DIR, DEFAULT_SEED, DEFAULT_TEST_FRACTION, DEFAULT_TOP_N,
};
pub use runner::{
    config_from_summary, load_dataset, parse_summary, rank, render_table, run_experiment,
    RankedReport, RunOptions, RunOutcome, SUMMARY_FILE,
};

use crate::error::{Error, Result};

/// Reads and validates a config file. Returns the config and the directory
/// its relative paths are resolved against.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf)> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e).in_stage("validate"))?;
    let config = validate_config(&raw)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.check_inputs(&base)?;
    Ok((config, base))
}
