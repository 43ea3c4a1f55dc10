// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::load_labels;
use super::metrics::Metrics;
use super::scan::{DetectionReport, Verdict};
use super::train::sibling_path;
use super::{read_json, write_json, write_text, EvalError, Mode};
use crate::localize::{format_time_saved, time_saved};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRow {
    pub circuit: String,
    pub mode: Mode,
    pub nn_level: u8,
    pub verdict: Verdict,
    pub infected: bool,
    pub coverage_pct: f64,
    pub detection_time_s: Option<f64>,
    pub node: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub mode: Mode,
    pub nn_level: u8,
    pub circuits: usize,
    /// Node-level (micro) in node mode, circuit-level otherwise.
    pub accuracy: f64,
    pub graph: Metrics,
    pub node: Metrics,
    pub node_macro_accuracy: f64,
    pub avg_coverage_pct: f64,
    pub max_coverage_pct: f64,
    pub avg_detection_time_s: Option<f64>,
    pub time_saved_pct: f64,
    pub time_saved: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
    pub circuits: Vec<CircuitRow>,
}

fn node_metrics(report: &DetectionReport, truth: &BTreeSet<String>) -> Metrics {
    let flags: BTreeSet<&str> = report.flags.iter().map(String::as_str).collect();
    let tp = flags.iter().filter(|f| truth.contains(**f)).count();
    let fp = flags.len() - tp;
    let fn_ = truth.len() - tp;
    let tn = report.node_count.saturating_sub(tp + fp + fn_);
    Metrics::from_counts(tp, fp, tn, fn_)
}

fn build_summary(reports: &[DetectionReport], truth: &BTreeMap<String, Vec<String>>) -> Result<EvalSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::CircuitMismatch("no reports to evaluate".into()));
    }
    let mut circuits = Vec::with_capacity(reports.len());
    for r in reports {
        let ids = truth
            .get(&r.circuit)
            .ok_or_else(|| EvalError::CircuitMismatch(format!("no truth labels for report '{}'", r.circuit)))?;
        let ids: BTreeSet<String> = ids.iter().cloned().collect();
        circuits.push(CircuitRow {
            circuit: r.circuit.clone(),
            mode: r.mode,
            nn_level: r.nn_level,
            verdict: r.verdict,
            infected: !ids.is_empty(),
            coverage_pct: r.coverage_at_level(),
            detection_time_s: r.detection_time_s,
            node: node_metrics(r, &ids),
        });
    }
    let mut groups: BTreeMap<(Mode, u8), Vec<&CircuitRow>> = BTreeMap::new();
    for c in &circuits {
        groups.entry((c.mode, c.nn_level)).or_default().push(c);
    }
    let mut rows = Vec::new();
    for ((mode, nn_level), members) in groups {
        let n = members.len() as f64;
        let mut graph = Metrics::default();
        let mut node = Metrics::default();
        for c in &members {
            let p = c.verdict == Verdict::Trojan;
            let a = c.infected;
            graph = graph.merge(&Metrics::from_counts(
                (p && a) as usize,
                (p && !a) as usize,
                (!p && !a) as usize,
                (!p && a) as usize,
            ));
            node = node.merge(&c.node);
        }
        let max_cov = members.iter().map(|c| c.coverage_pct).fold(0.0, f64::max);
        let times: Vec<f64> = members.iter().filter_map(|c| c.detection_time_s).collect();
        rows.push(EvalRow {
            mode,
            nn_level,
            circuits: members.len(),
            accuracy: if mode == Mode::Nn { node.accuracy } else { graph.accuracy },
            graph,
            node,
            node_macro_accuracy: members.iter().map(|c| c.node.accuracy).sum::<f64>() / n,
            avg_coverage_pct: members.iter().map(|c| c.coverage_pct).sum::<f64>() / n,
            max_coverage_pct: max_cov,
            avg_detection_time_s: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
            time_saved_pct: time_saved(max_cov)?,
            time_saved: format_time_saved(max_cov)?,
        });
    }
    Ok(EvalSummary { rows, circuits })
}

/// Plain-text table with one row per (mode, level).
pub fn summary_table(summary: &EvalSummary) -> String {
    let mut s = String::from(
        "mode  level  circuits  accuracy  avg_cov(%)  max_cov(%)  avg_time(s)  time_saved\n",
    );
    for r in &summary.rows {
        let time = r
            .avg_detection_time_s
            .map(|t| format!("{t:.3}"))
            .unwrap_or_else(|| "-".into());
        writeln!(
            s,
            "{:<5} {:>5}  {:>8}  {:>8.3}  {:>10.1}  {:>10.1}  {:>11}  {:>10}",
            r.mode.name(),
            r.nn_level,
            r.circuits,
            r.accuracy,
            r.avg_coverage_pct,
            r.max_coverage_pct,
            time,
            r.time_saved
        )
        .expect("write to string");
    }
    s
}

/// Horizontal bar chart of per-circuit coverage.
pub fn coverage_svg(bars: &[(String, f64)]) -> String {
    let bar_h = 16;
    let label_w = 180;
    let plot_w = 400;
    let height = 40 + bars.len() * (bar_h + 4);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
        label_w + plot_w + 60
    )
    .expect("write to string");
    writeln!(s, r#"<text x="4" y="16">code coverage (%)</text>"#).expect("write to string");
    for (i, (name, pct)) in bars.iter().enumerate() {
        let y = 28 + i * (bar_h + 4);
        let w = (pct.clamp(0.0, 100.0) / 100.0 * plot_w as f64).round() as usize;
        writeln!(
            s,
            r#"<text x="4" y="{}">{}</text><rect x="{label_w}" y="{y}" width="{w}" height="{bar_h}" fill="steelblue"/><text x="{}" y="{}">{pct:.1}</text>"#,
            y + 12,
            xml_escape(name),
            label_w + w + 4,
            y + 12
        )
        .expect("write to string");
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scores every report in `reports_dir` against `truth` and writes the
/// metrics JSON plus a text table and SVG chart beside it.
pub fn run_eval(reports_dir: &Path, truth_path: &Path, out_path: &Path) -> Result<EvalSummary, EvalError> {
    let truth = load_labels(truth_path)?;
    let mut paths: Vec<_> = std::fs::read_dir(reports_dir)
        .map_err(|e| EvalError::io(reports_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.canonicalize().ok() != out_path.canonicalize().ok())
        .collect();
    paths.sort();
    let reports = paths
        .iter()
        .map(|p| read_json::<DetectionReport>(p))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = build_summary(&reports, &truth)?;
    write_json(out_path, &summary)?;
    write_text(&sibling_path(out_path, "txt"), &summary_table(&summary))?;
    let bars: Vec<(String, f64)> = summary
        .circuits
        .iter()
        .map(|c| (c.circuit.clone(), c.coverage_pct))
        .collect();
    write_text(&sibling_path(out_path, "svg"), &coverage_svg(&bars))?;
    Ok(summary)
}
