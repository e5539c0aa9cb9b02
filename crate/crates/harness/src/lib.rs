//! Experiment runner for the horolab core: configuration, the registered
//! experiments, and CSV/JSON artifacts.

pub mod config;
pub mod context;
pub mod experiments;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use horolab::density::DensityError;
use horolab::dynamics::DynamicsError;
use horolab::measures::MeasureError;
use horolab::schottky::SchottkyError;
use thiserror::Error;

pub use config::{ExperimentConfig, GroupSpec, EXPERIMENTS};
pub use context::Context;
pub use output::{Check, ExperimentOutput, Row};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical_from!(DensityError, MeasureError, DynamicsError, SchottkyError);

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: ExperimentOutput,
    pub csv: String,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub wall_time_seconds: f64,
}

/// Runs one experiment and writes its artifacts. Nothing is written unless
/// the configuration validates and the experiment completes.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let (group_id, group) = config.group.load()?;
    let started = Instant::now();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if config.threads > 0 {
            b = b.num_threads(config.threads);
        }
        b.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
    };
    let threads = pool.current_num_threads();
    let output = pool.install(|| {
        let ctx = Context::new(config.clone(), group_id.clone(), group);
        experiments::dispatch(&ctx)
    })?;
    let wall_time_seconds = started.elapsed().as_secs_f64();
    let csv = output::to_csv(&output.rows)?;
    let csv_path = config.out.join(format!("{}.csv", config.experiment));
    let manifest = output::Manifest {
        config,
        config_hash: config.hash(),
        group_id,
        harness_version: env!("CARGO_PKG_VERSION"),
        core_version: horolab::VERSION,
        threads,
        wall_time_seconds,
        rows: output.rows.len(),
        checks: &output.checks,
        csv: csv_path,
    };
    let (csv_path, manifest_path) = output::write_artifacts(&config.out, &config.experiment, &csv, &manifest)?;
    Ok(RunOutcome { output, csv, csv_path, manifest_path, wall_time_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_is_config_error_and_writes_nothing() {
        let mut c = ExperimentConfig::new("not-an-experiment");
        c.out = std::env::temp_dir().join("horolab-unknown-experiment");
        let _ = std::fs::remove_dir_all(&c.out);
        let err = run(&c).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        assert_eq!(err.exit_code(), 2);
        assert!(!c.out.exists());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Io(String::new()).exit_code(), 1);
        assert_eq!(HarnessError::Numerical(String::new()).exit_code(), 3);
    }
}
