//! Command-line orchestration for the meanfield solver: configs, run directories and reports.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod criteria;
pub mod error;
pub mod report;
pub mod stats;

use std::path::Path;

use artifacts::Manifest;
use config::{Mode, RunConfig};
use error::CliError;

/// Load, override, validate and run one computing mode into `out`.
pub fn execute(mode: Mode, config: &Path, out: &Path, grid: Option<usize>, quiet: bool) -> Result<Manifest, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(n) = grid {
        cfg.grid = n;
    }
    cfg.mode = Some(mode);
    let grid = cfg.validate(mode)?;
    let ctx = commands::Context {
        config: &cfg,
        grid,
        out,
        quiet,
    };
    commands::run(mode, &ctx)
}
