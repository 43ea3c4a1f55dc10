// SPDX-License-Identifier: Apache-2.0

//! End-to-end pipeline: datasets, training, scanning, metrics and reports.

mod dataset;
mod metrics;
mod model;
mod report;
mod scan;
mod train;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::localize::DEFAULT_TAU;
use crate::ml::{TrainConfig, TreeConfig};

pub use dataset::{load_circuit, load_dataset, load_labels, split_indices, Circuit, Split};
pub use metrics::{compute_metrics, Metrics};
pub use model::{train_detector, DetectorModel, Scaler, TrainedDetector};
pub use report::{coverage_svg, run_eval, summary_table, CircuitRow, EvalRow, EvalSummary};
pub use scan::{
    run_scan, scan_circuit, thread_pool, DetectionReport, NodeCategories, RegionSets, ScanSummary,
    ScanTarget, Verdict,
};
pub use train::{run_train, sibling_path, train_and_score, HeldOutMetrics, Localized, TrainOutcome};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{circuit}: {message}")]
    Circuit { circuit: String, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("incompatible mode: {0}")]
    IncompatibleMode(String),
    #[error("predicted has {predicted} labels, truth has {truth}")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("circuit mismatch: {0}")]
    CircuitMismatch(String),
    #[error("no labels for circuit {0}")]
    MissingLabels(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model error: {0}")]
    Ml(#[from] crate::ml::MlError),
    #[error("feature error: {0}")]
    Feature(#[from] crate::features::FeatureError),
    #[error("localization error: {0}")]
    Localize(#[from] crate::localize::LocalizeError),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        EvalError::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn circuit(circuit: &str, message: impl fmt::Display) -> Self {
        EvalError::Circuit {
            circuit: circuit.to_string(),
            message: message.to_string(),
        }
    }
}

/// Detection mode: graph embedding + decision tree, graph-level GCN, or
/// node-level GCN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Tree,
    Gg,
    Nn,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Tree => "tree",
            Mode::Gg => "gg",
            Mode::Nn => "nn",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(Mode::Tree),
            "gg" => Ok(Mode::Gg),
            "nn" => Ok(Mode::Nn),
            other => Err(EvalError::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaConfig {
    pub enabled: bool,
    pub k: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig { enabled: true, k: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    pub nn_level: u8,
    /// Training fraction of the circuit split.
    pub split: f64,
    pub seed: u64,
    pub pca: PcaConfig,
    /// Node flag threshold on `p(TROJAN)`.
    pub threshold: f64,
    /// GCN hyperparameters; the mode's preset when absent.
    pub gcn: Option<TrainConfig>,
    pub tree: TreeConfig,
    pub wl_iterations: usize,
    /// Pattern similarity threshold for graph-level localization.
    pub tau: f64,
    /// Omit wall-clock timings from reports so reruns are byte-identical.
    pub reproducible: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Nn,
            nn_level: 2,
            split: 0.8,
            seed: 0,
            pca: PcaConfig::default(),
            threshold: 0.5,
            gcn: None,
            tree: TreeConfig::default(),
            wl_iterations: crate::features::DEFAULT_WL_ITERATIONS,
            tau: DEFAULT_TAU,
            reproducible: false,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), EvalError> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(EvalError::InvalidConfig(format!("split {} is outside (0, 1)", self.split)));
        }
        if self.nn_level > 2 {
            return Err(EvalError::InvalidConfig(format!("nn_level {} is not 0, 1 or 2", self.nn_level)));
        }
        if self.mode == Mode::Tree && self.nn_level != 0 {
            return Err(EvalError::IncompatibleMode(
                "tree mode classifies whole circuits and supports nn_level 0 only".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(EvalError::InvalidConfig(format!("threshold {} is outside (0, 1]", self.threshold)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(EvalError::InvalidConfig(format!("tau {} is outside (0, 1]", self.tau)));
        }
        if self.pca.enabled && self.pca.k == 0 {
            return Err(EvalError::InvalidConfig("pca.k must be positive".into()));
        }
        Ok(())
    }

    /// GCN settings for this run; the preset follows the mode and takes the run seed.
    pub fn train_config(&self) -> TrainConfig {
        match &self.gcn {
            Some(c) => c.clone(),
            None => {
                let base = match self.mode {
                    Mode::Gg => TrainConfig::graph_default(),
                    _ => TrainConfig::node_default(),
                };
                TrainConfig {
                    seed: self.seed,
                    train_fraction: self.split,
                    ..base
                }
            }
        }
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::json(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| EvalError::json(path, e))? + "\n";
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), EvalError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| EvalError::io(path, e))
}
