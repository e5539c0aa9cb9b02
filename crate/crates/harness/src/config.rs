//! Run configuration: JSON file, CLI overrides, `HOROLAB_SEED`.

use std::path::{Path, PathBuf};

use horolab::measures::FlowBox;
use horolab::schottky::SchottkyData;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Every experiment the runner knows, in registration order.
pub const EXPERIMENTS: &[&str] = &[
    "geometry",
    "conformality",
    "lebesgue-cocycle",
    "delta",
    "bm-invariance",
    "br-invariance",
    "conditional-scaling",
    "mixing",
    "equidistribution",
    "push-identity",
    "ratio-limit",
    "transverse",
    "annulus",
    "radius-perturb",
    "equicontinuity",
];

pub const SEED_ENV: &str = "HOROLAB_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupSpec {
    Preset(String),
    File(PathBuf),
}

impl GroupSpec {
    /// Loads the group; the id is the preset name or the file stem.
    pub fn load(&self) -> Result<(String, SchottkyData), HarnessError> {
        match self {
            GroupSpec::Preset(name) => {
                let g = SchottkyData::preset(name).map_err(|e| HarnessError::Config(e.to_string()))?;
                Ok((name.clone(), g))
            }
            GroupSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Config(format!("cannot read group file {}: {e}", path.display())))?;
                let g = SchottkyData::from_json(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "file".into());
                Ok((id, g))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub group: GroupSpec,
    /// Word length of the Patterson-Sullivan cutoff and the δ estimate.
    pub k: usize,
    /// Coding level the boundary measures are coarsened to for `m̂_BM`.
    pub bm_level: usize,
    pub t_step: f64,
    pub t_window: (f64, f64),
    /// Coding level of the backward measure in `m̂_BR`.
    pub br_level: usize,
    pub br_t_step: f64,
    pub br_window: (f64, f64),
    pub lebesgue_resolution: usize,
    /// Cells per ball diameter for BM conditionals (sparse, so large is cheap).
    pub conditional_resolution: usize,
    /// Spacing of uniform horocycle grids.
    pub grid_step: f64,
    /// Spacing of the horocycle walk counting plaque crossings.
    pub walk_step: f64,
    /// Window the test functions must fit in.
    pub test_window: (f64, f64),
    pub suite: String,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub frames: usize,
    pub r0: f64,
    pub samples: usize,
    pub flow_box: Option<FlowBox>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            group: GroupSpec::Preset("default".into()),
            k: 12,
            bm_level: 4,
            t_step: 0.05,
            t_window: (-30.0, 30.0),
            br_level: 3,
            br_t_step: 0.1,
            br_window: (-5.0, 5.0),
            lebesgue_resolution: 2048,
            conditional_resolution: 100_000_000,
            grid_step: 1e-3,
            walk_step: 0.01,
            test_window: (-5.0, 5.0),
            suite: "standard".into(),
            t: Vec::new(),
            r: Vec::new(),
            frames: 3,
            r0: 1.0,
            samples: 0,
            flow_box: None,
            seed: 1,
            out: PathBuf::from("results"),
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        ExperimentConfig { experiment: experiment.to_string(), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies `HOROLAB_SEED` if set.
    pub fn apply_env(&mut self) -> Result<(), HarnessError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("{SEED_ENV} must be a decimal u64, got {v:?}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return bad(format!("unknown experiment {:?}; known: {}", self.experiment, EXPERIMENTS.join(", ")));
        }
        if self.suite != "standard" {
            return bad(format!("unknown test-function suite {:?}", self.suite));
        }
        if self.k < 6 || self.bm_level == 0 || self.br_level == 0 {
            return bad("k must be >= 6 and coding levels >= 1".into());
        }
        if self.bm_level > self.k || self.br_level > self.k {
            return bad("coding levels cannot exceed k".into());
        }
        let positive = [
            ("t_step", self.t_step),
            ("br_t_step", self.br_t_step),
            ("grid_step", self.grid_step),
            ("walk_step", self.walk_step),
            ("r0", self.r0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, (a, b)) in [("t_window", self.t_window), ("br_window", self.br_window), ("test_window", self.test_window)]
        {
            if !(a < b && a.is_finite() && b.is_finite()) {
                return bad(format!("{name} must be an increasing finite interval"));
            }
        }
        if self.lebesgue_resolution < 16 || self.conditional_resolution < 16 {
            return bad("resolutions must be at least 16".into());
        }
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if self.r.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad("radii must be positive".into());
        }
        if self.t.iter().any(|t| !t.is_finite()) {
            return bad("times must be finite".into());
        }
        if let Some(b) = &self.flow_box {
            b.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Hash of everything that determines the results (output path and
    /// thread count excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        canonical.threads = 0;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn times_or(&self, default: &[f64]) -> Vec<f64> {
        if self.t.is_empty() {
            default.to_vec()
        } else {
            self.t.clone()
        }
    }

    pub fn radii_or(&self, default: &[f64]) -> Vec<f64> {
        if self.r.is_empty() {
            default.to_vec()
        } else {
            self.r.clone()
        }
    }
}

/// Parses `2,4,6` or `e6,e9,100` (`eX` means `exp(X)`).
pub fn parse_list(text: &str) -> Result<Vec<f64>, HarnessError> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let value = match item.strip_prefix('e') {
                Some(exponent) => exponent.parse::<f64>().map(f64::exp),
                None => item.parse::<f64>(),
            };
            value.map_err(|_| HarnessError::Config(format!("cannot parse list item {item:?}")))
        })
        .collect()
}
