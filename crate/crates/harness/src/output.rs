//! Result rows, pass/fail checks and the on-disk artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::HarnessError;

pub const CSV_HEADER: [&str; 14] = [
    "experiment",
    "group_id",
    "frame_id",
    "r",
    "t",
    "weighting",
    "phi_id",
    "psi_id",
    "value",
    "target",
    "rel_err",
    "atoms",
    "seed",
    "config_hash",
];

/// One CSV line. Empty optional cells are written as empty strings.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Row {
    pub experiment: String,
    pub group_id: String,
    pub frame_id: Option<usize>,
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub weighting: String,
    pub phi_id: String,
    pub psi_id: String,
    pub value: f64,
    pub target: Option<f64>,
    pub rel_err: Option<f64>,
    pub atoms: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl Row {
    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self.rel_err = Some(relative_error(self.value, target));
        self
    }
}

pub fn relative_error(value: f64, target: f64) -> f64 {
    if target == 0.0 {
        value.abs()
    } else {
        (value - target).abs() / target.abs()
    }
}

/// A pass/fail verdict computed by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }

    /// `value <= threshold`, with the numbers in the detail.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check::new(name, value <= threshold, format!("{value:.4e} <= {threshold:.4e}"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(rows: &[Row]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(io_error)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.group_id.clone(),
            r.frame_id.map(|f| f.to_string()).unwrap_or_default(),
            cell(r.r),
            cell(r.t),
            r.weighting.clone(),
            r.phi_id.clone(),
            r.psi_id.clone(),
            r.value.to_string(),
            cell(r.target),
            cell(r.rel_err),
            r.atoms.to_string(),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])
        .map_err(io_error)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn io_error(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a ExperimentConfig,
    pub config_hash: String,
    pub group_id: String,
    pub harness_version: &'static str,
    pub core_version: &'static str,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub rows: usize,
    pub checks: &'a [Check],
    pub csv: PathBuf,
}

/// Writes `<out>/<experiment>.csv` and `<out>/<experiment>.manifest.json`.
pub fn write_artifacts(
    out: &Path,
    experiment: &str,
    csv_text: &str,
    manifest: &Manifest<'_>,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
    let csv_path = out.join(format!("{experiment}.csv"));
    let manifest_path = out.join(format!("{experiment}.manifest.json"));
    std::fs::write(&csv_path, csv_text).map_err(|e| HarnessError::Io(e.to_string()))?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json).map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok((csv_path, manifest_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let row = Row { experiment: "x".into(), value: 0.5, seed: 3, ..Default::default() }.with_target(0.25);
        let text = to_csv(&[row]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "x,,,,,,,,0.5,0.25,1,0,3,");
    }
}
