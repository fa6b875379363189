//! Run configuration: one JSON document, unknown keys rejected.
//!
//! ```json
//! {
//!   "dataset": "toy",
//!   "seed": 0,
//!   "workers": 1,
//!   "toy": { "n": 30, "beta_range": [-0.38, 0.38], "resolution": [48, 60] },
//!   "optimizer": { "r": 1, "step": 2.5, "continuation_c1": { "enabled": true } },
//!   "surrogate": { "n_opt": { "energy": 0.999, "max": 32 } }
//! }
//! ```
//!
//! Every section and field is optional. Relative paths are taken from the
//! working directory.

use std::fs;
use std::path::{Path, PathBuf};

use morphopt::ommgp::{GpConfig, ModeSelection, TrainConfig};
use morphopt::optim::OptimizerConfig;
use morphopt::toy::{DEFAULT_BETA_RANGE, DEFAULT_RESOLUTION};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub n: usize,
    pub beta_range: (f64, f64),
    /// Grid points along x and y.
    pub resolution: (usize, usize),
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n: 30,
            beta_range: DEFAULT_BETA_RANGE,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub n_geo: ModeSelection,
    pub n_opt: ModeSelection,
    pub gp_starts: usize,
    pub gp_max_iters: u64,
    pub gp_min_noise: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        let gp = GpConfig::default();
        Self {
            n_geo: ModeSelection::default(),
            n_opt: ModeSelection::default(),
            gp_starts: gp.starts,
            gp_max_iters: gp.max_iters,
            gp_min_noise: gp.min_noise,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    /// Parameters `mu` of the new sample.
    pub params: Vec<f64>,
    /// Geometry to predict on; the bundle's reference mesh when absent.
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset directory written by `gen-toy`; generated from `toy` when absent.
    pub dataset: Option<PathBuf>,
    /// Held-out dataset for `eval`; leave-one-out on `dataset` when absent.
    pub test_dataset: Option<PathBuf>,
    /// Optimizer checkpoint holding morphings, for `pod`.
    pub morphings: Option<PathBuf>,
    /// Trained surrogate directory, for `predict` and `eval`.
    pub bundle: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub toy: ToyConfig,
    pub optimizer: OptimizerConfig,
    pub surrogate: SurrogateConfig,
    pub predict: PredictConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.into(),
            msg: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.into(),
            msg: e.to_string(),
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            n_geo: self.surrogate.n_geo,
            n_opt: self.surrogate.n_opt,
            r: self.optimizer.r,
            optimizer: self.optimizer.clone(),
            gp: GpConfig {
                starts: self.surrogate.gp_starts,
                max_iters: self.surrogate.gp_max_iters,
                seed: self.seed,
                min_noise: self.surrogate.gp_min_noise,
            },
        }
    }
}
