// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset, split_indices, Circuit, Split};
use super::metrics::Metrics;
use super::model::{train_detector, TrainedDetector};
use super::scan::{missed_trojans, scan_circuit, DetectionReport, Verdict};
use super::{write_json, write_text, EvalError, Mode, RunConfig};
use crate::ml::TROJAN;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Localized {
    pub infected: usize,
    /// Infected circuits whose every Trojan gate lies in the level-2 region.
    pub complete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutMetrics {
    pub mode: Mode,
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Circuit verdicts against infection status.
    pub graph: Metrics,
    /// Node flags pooled over all test circuits (node mode).
    pub node: Option<Metrics>,
    /// Mean of per-circuit node accuracies (node mode).
    pub node_macro_accuracy: Option<f64>,
    pub localized: Localized,
    pub final_loss: Option<f64>,
}

impl HeldOutMetrics {
    /// Scores held-out reports produced with ground truth attached.
    pub fn from_reports(mode: Mode, split_names: (Vec<String>, Vec<String>), tests: &[&Circuit], reports: &[DetectionReport], final_loss: Option<f64>) -> Self {
        let mut graph = Metrics::default();
        let mut node = Metrics::default();
        let mut macro_sum = 0.0;
        let mut localized = Localized::default();
        for (c, r) in tests.iter().zip(reports) {
            let predicted = r.verdict == Verdict::Trojan;
            let actual = c.graph_label() == TROJAN;
            graph = graph.merge(&Metrics::from_counts(
                (predicted && actual) as usize,
                (predicted && !actual) as usize,
                (!predicted && !actual) as usize,
                (!predicted && actual) as usize,
            ));
            if let Some(cat) = &r.node_categories {
                let m = Metrics::from_counts(cat.tp.len(), cat.fp.len(), cat.tn.len(), cat.fn_.len());
                macro_sum += m.accuracy;
                node = node.merge(&m);
            }
            if actual {
                localized.infected += 1;
                if missed_trojans(c, &r.regions.r2).is_empty() {
                    localized.complete += 1;
                }
            }
        }
        let node_mode = mode == Mode::Nn;
        HeldOutMetrics {
            mode,
            train: split_names.0,
            test: split_names.1,
            graph,
            node: node_mode.then_some(node),
            node_macro_accuracy: (node_mode && !tests.is_empty()).then(|| macro_sum / tests.len() as f64),
            localized,
            final_loss,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub detector: TrainedDetector,
    pub split: Split,
    pub metrics: HeldOutMetrics,
    pub reports: Vec<DetectionReport>,
    pub files: Vec<PathBuf>,
}

/// `dir/model.json` → `dir/model.<suffix>`.
pub fn sibling_path(model_path: &Path, suffix: &str) -> PathBuf {
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    model_path.with_file_name(format!("{stem}.{suffix}"))
}

/// Trains on the seeded training split, scores the held-out split and
/// writes the model, its loss trace and held-out metrics.
pub fn run_train(config: &RunConfig, manifest_path: &Path, model_out: &Path) -> Result<TrainOutcome, EvalError> {
    config.check()?;
    let circuits = load_dataset(manifest_path)?;
    let outcome = train_and_score(config, &circuits)?;
    let mut files = vec![model_out.to_path_buf()];
    write_json(model_out, &outcome.detector.model)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.detector.loss_trace.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1).expect("write to string");
    }
    let loss_path = sibling_path(model_out, "loss.csv");
    write_text(&loss_path, &csv)?;
    files.push(loss_path);
    let metrics_path = sibling_path(model_out, "metrics.json");
    write_json(&metrics_path, &outcome.metrics)?;
    files.push(metrics_path);
    if let Some(lib) = &outcome.detector.patterns {
        let p = sibling_path(model_out, "patterns.json");
        write_json(&p, lib)?;
        files.push(p);
    }
    Ok(TrainOutcome { files, ..outcome })
}

/// In-memory training and held-out scoring over loaded circuits.
pub fn train_and_score(config: &RunConfig, circuits: &[Circuit]) -> Result<TrainOutcome, EvalError> {
    if circuits.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let split = split_indices(circuits.len(), config.split, config.seed);
    if split.train.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let train: Vec<&Circuit> = split.train.iter().map(|&i| &circuits[i]).collect();
    let test: Vec<&Circuit> = split.test.iter().map(|&i| &circuits[i]).collect();
    let detector = train_detector(config, &train)?;
    let scan_config = RunConfig {
        reproducible: true,
        ..config.clone()
    };
    let reports = test
        .iter()
        .map(|c| scan_circuit(&detector.model, detector.patterns.as_ref(), &scan_config, c, true))
        .collect::<Result<Vec<_>, _>>()?;
    let names = |v: &[&Circuit]| v.iter().map(|c| c.name.clone()).collect::<Vec<_>>();
    let metrics = HeldOutMetrics::from_reports(
        config.mode,
        (names(&train), names(&test)),
        &test,
        &reports,
        detector.loss_trace.last().copied(),
    );
    Ok(TrainOutcome {
        detector,
        split,
        metrics,
        reports,
        files: Vec::new(),
    })
}
