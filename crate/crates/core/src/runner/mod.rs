//! Experiment configuration, execution and reporting.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use compare::{compare_trajectories, ComparisonReport, CompareError, TrajectorySet};
pub use config::{load_config, parse_config, Engine, ExperimentConfig};
pub use experiment::{run_experiment, simulate, EngineRun, RunSummary, Termination};
pub use output::{emit_plot_data, PlotKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("engine error: {0}")]
    Engine(String),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    /// The run finished early on a crossing, stiffness or similar event.
    pub const PHYSICS_TERMINAL: i32 = 3;
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}

/// Resolves `source` as a preset name or a config file path.
pub fn resolve_source(source: &str, overrides: &[String]) -> Result<ExperimentConfig, RunError> {
    match presets::preset(source) {
        Some(text) => parse_config(text, overrides),
        None => load_config(Path::new(source), overrides),
    }
}
