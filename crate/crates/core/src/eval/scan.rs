// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{load_circuit, load_labels, Circuit};
use super::model::DetectorModel;
use super::train::sibling_path;
use super::{read_json, write_json, write_text, EvalError, Mode, RunConfig};
use crate::benchgen::Manifest;
use crate::graph::{to_dot, NodeCategory};
use crate::localize::{
    coverage, flag_nodes, graph_intersection, map_to_netlist, nn_expand, time_saved, LevelCoverage, Location,
    PatternLibrary, PatternMatch, Region,
};
use crate::ml::{Prediction, TROJAN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "TROJAN")]
    Trojan,
    #[serde(rename = "NON_TROJAN")]
    NonTrojan,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionSets {
    pub r0: Vec<usize>,
    pub r1: Vec<usize>,
    pub r2: Vec<usize>,
}

/// Node refs by confusion class against ground truth, plus the one-hop
/// neighbours of flagged nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeCategories {
    pub tp: Vec<String>,
    pub tn: Vec<String>,
    pub fp: Vec<String>,
    #[serde(rename = "fn")]
    pub fn_: Vec<String>,
    pub nn1: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub circuit: String,
    pub mode: Mode,
    pub verdict: Verdict,
    pub nn_level: u8,
    pub node_count: usize,
    /// Circuit-level `p(TROJAN)` for modes that produce one.
    pub trojan_probability: Option<f64>,
    /// Refs of the flagged nodes, in node order.
    pub flags: Vec<String>,
    pub regions: RegionSets,
    pub matches: Vec<PatternMatch>,
    pub locations: Vec<Location>,
    pub coverage_pct: LevelCoverage,
    pub time_saved_pct: f64,
    pub detection_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_categories: Option<NodeCategories>,
}

impl DetectionReport {
    pub fn coverage_at_level(&self) -> f64 {
        match self.nn_level {
            0 => self.coverage_pct.r0,
            1 => self.coverage_pct.r1,
            _ => self.coverage_pct.r2,
        }
    }

    /// Fill colours for the DOT export.
    pub fn dot_categories(&self, circuit: &Circuit) -> BTreeMap<usize, NodeCategory> {
        let g = &circuit.graph;
        let mut out = BTreeMap::new();
        let id = |name: &String| g.node_by_ref(name);
        match &self.node_categories {
            Some(c) => {
                for (names, cat) in [
                    (&c.tn, NodeCategory::TrueNegative),
                    (&c.nn1, NodeCategory::Neighbour),
                    (&c.fn_, NodeCategory::FalseNegative),
                    (&c.fp, NodeCategory::FalsePositive),
                    (&c.tp, NodeCategory::TruePositive),
                ] {
                    for v in names.iter().filter_map(id) {
                        out.insert(v, cat);
                    }
                }
            }
            None => {
                for &v in &self.regions.r1 {
                    out.insert(v, NodeCategory::Neighbour);
                }
                for &v in &self.regions.r0 {
                    out.insert(v, NodeCategory::Flagged);
                }
            }
        }
        out
    }
}

fn ratio_coverage(circuit: &Circuit, region: &Region) -> Result<f64, EvalError> {
    if circuit.graph.is_empty() {
        return Ok(0.0);
    }
    Ok(coverage(&circuit.graph, region)?)
}

/// Runs one circuit through prediction, flagging, region growth, pattern
/// matching and source mapping.
pub fn scan_circuit(
    model: &DetectorModel,
    patterns: Option<&PatternLibrary>,
    config: &RunConfig,
    circuit: &Circuit,
    with_truth: bool,
) -> Result<DetectionReport, EvalError> {
    let start = Instant::now();
    let g = &circuit.graph;
    let (r0, verdict, probability, matches) = match model.mode() {
        Mode::Nn => {
            let probs = model.node_probabilities(g)?.expect("node model");
            let r0 = flag_nodes(&probs, config.threshold)?;
            let verdict = if r0.is_empty() { Verdict::NonTrojan } else { Verdict::Trojan };
            (r0, verdict, None, Vec::new())
        }
        Mode::Gg | Mode::Tree => {
            let p = model.graph_probabilities(g)?.expect("graph model");
            let verdict = if Prediction::from_probabilities(p).class == TROJAN {
                Verdict::Trojan
            } else {
                Verdict::NonTrojan
            };
            let matches: Vec<PatternMatch> = match patterns {
                Some(lib) if model.mode() == Mode::Gg => graph_intersection(g, lib),
                _ => Vec::new(),
            };
            let seeds = if verdict == Verdict::Trojan {
                matches.iter().flat_map(|m| m.seeds.iter().copied()).collect()
            } else {
                Vec::new()
            };
            (Region::new(0, seeds, "matched"), verdict, Some(p[TROJAN]), matches)
        }
    };
    let r1 = nn_expand(g, &r0, 1)?;
    let r2 = nn_expand(g, &r0, 2)?;
    let coverage_pct = LevelCoverage {
        r0: ratio_coverage(circuit, &r0)?,
        r1: ratio_coverage(circuit, &r1)?,
        r2: ratio_coverage(circuit, &r2)?,
    };
    let level_region = match config.nn_level {
        0 => &r0,
        1 => &r1,
        _ => &r2,
    };
    let locations = map_to_netlist(g, level_region)?;
    let elapsed = start.elapsed().as_secs_f64();

    let name = |v: &usize| g.node(*v).name.clone();
    let node_categories = with_truth.then(|| {
        let labels = circuit.node_labels();
        let mut c = NodeCategories::default();
        for (v, &truth) in labels.iter().enumerate() {
            let bucket = match (r0.contains(v), truth == TROJAN) {
                (true, true) => &mut c.tp,
                (true, false) => &mut c.fp,
                (false, false) => &mut c.tn,
                (false, true) => &mut c.fn_,
            };
            bucket.push(name(&v));
        }
        c.nn1 = r1.nodes.iter().filter(|v| !r0.contains(**v)).map(name).collect();
        c
    });
    let mut report = DetectionReport {
        circuit: circuit.name.clone(),
        mode: model.mode(),
        verdict,
        nn_level: config.nn_level,
        node_count: g.len(),
        trojan_probability: probability,
        flags: r0.nodes.iter().map(name).collect(),
        regions: RegionSets {
            r0: r0.nodes.clone(),
            r1: r1.nodes,
            r2: r2.nodes,
        },
        matches,
        locations,
        coverage_pct,
        time_saved_pct: 0.0,
        detection_time_s: (!config.reproducible).then_some(elapsed),
        node_categories,
    };
    report.time_saved_pct = time_saved(report.coverage_at_level())?;
    Ok(report)
}

/// Rayon pool sized by `HTSCAN_THREADS` when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("HTSCAN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        b = b.num_threads(n);
    }
    b.build().expect("thread pool")
}

#[derive(Debug, Clone)]
pub enum ScanTarget {
    Netlist(PathBuf),
    Manifest(PathBuf),
}

#[derive(Debug, Clone, Default)]
pub struct ScanSummary {
    pub reports: Vec<DetectionReport>,
    /// `circuit: message` for each circuit that could not be scanned.
    pub errors: Vec<String>,
}

impl ScanSummary {
    pub fn trojan_found(&self) -> bool {
        self.reports.iter().any(|r| r.verdict == Verdict::Trojan)
    }

    /// 1 on any error, otherwise 2 if a Trojan was reported, else 0.
    pub fn exit_code(&self) -> i32 {
        if !self.errors.is_empty() {
            1
        } else if self.trojan_found() {
            2
        } else {
            0
        }
    }
}

/// Scans one netlist or every circuit of a manifest and writes
/// `<circuit>.json` (and `<circuit>.dot`) reports into `out_dir`.
pub fn run_scan(
    config: &RunConfig,
    model_path: &Path,
    patterns_path: Option<&Path>,
    target: &ScanTarget,
    out_dir: &Path,
    dot: bool,
    truth_path: Option<&Path>,
) -> Result<ScanSummary, EvalError> {
    config.check()?;
    let model: DetectorModel = read_json(model_path)?;
    if model.mode() != config.mode {
        return Err(EvalError::IncompatibleMode(format!(
            "model was trained in {} mode, scan requested {}",
            model.mode(),
            config.mode
        )));
    }
    let patterns: Option<PatternLibrary> = match patterns_path {
        Some(p) => Some(read_json(p)?),
        None => {
            let sibling = sibling_path(model_path, "patterns.json");
            if model.mode() == Mode::Gg && sibling.exists() {
                Some(read_json(&sibling)?)
            } else {
                None
            }
        }
    };
    let truth = truth_path.map(load_labels).transpose()?;
    let jobs: Vec<(String, PathBuf)> = match target {
        ScanTarget::Netlist(p) => {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            vec![(stem, p.clone())]
        }
        ScanTarget::Manifest(m) => {
            let manifest: Manifest = read_json(m)?;
            let root = m.parent().unwrap_or(Path::new("."));
            manifest
                .circuits
                .iter()
                .map(|e| (e.name.clone(), root.join(&e.path)))
                .collect()
        }
    };

    let results: Vec<Result<(Circuit, DetectionReport), String>> = thread_pool().install(|| {
        jobs.par_iter()
            .map(|(name, path)| {
                let ids: Vec<String> = match &truth {
                    Some(t) => t
                        .get(name)
                        .cloned()
                        .ok_or_else(|| format!("{name}: no truth labels"))?,
                    None => Vec::new(),
                };
                let mut circuit = load_circuit(path, ids).map_err(|e| match e {
                    EvalError::Circuit { .. } => e.to_string(),
                    other => format!("{name}: {other}"),
                })?;
                circuit.name = name.clone();
                let report = scan_circuit(&model, patterns.as_ref(), config, &circuit, truth.is_some())
                    .map_err(|e| format!("{name}: {e}"))?;
                Ok((circuit, report))
            })
            .collect()
    });

    let mut summary = ScanSummary::default();
    for r in results {
        match r {
            Ok((circuit, report)) => {
                write_json(&out_dir.join(format!("{}.json", report.circuit)), &report)?;
                if dot {
                    let text = to_dot(&circuit.graph, &report.dot_categories(&circuit));
                    write_text(&out_dir.join(format!("{}.dot", report.circuit)), &text)?;
                }
                summary.reports.push(report);
            }
            Err(e) => summary.errors.push(e),
        }
    }
    Ok(summary)
}

/// Refs of all Trojan-labelled instances that fall outside `region`.
pub(crate) fn missed_trojans(circuit: &Circuit, region: &[usize]) -> BTreeSet<String> {
    let inside: BTreeSet<&str> = region.iter().map(|&v| circuit.graph.node(v).name.as_str()).collect();
    circuit
        .trojan_ids
        .iter()
        .filter(|id| !inside.contains(id.as_str()))
        .cloned()
        .collect()
}
