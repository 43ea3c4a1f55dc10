// SPDX-License-Identifier: Apache-2.0

//! From per-node predictions to located Trojans: flagged sets, nearest
//! neighbour regions, pattern matches and netlist locations.

mod patterns;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::CircuitGraph;
use crate::ml::TROJAN;

pub use patterns::{
    graph_intersection, multiset_jaccard, node_signature, PatternLibrary, PatternMatch, Signature,
    TrojanPattern, DEFAULT_TAU,
};

#[derive(Debug, Error, PartialEq)]
pub enum LocalizeError {
    #[error("threshold {0} is outside (0, 1]")]
    BadThreshold(f64),
    #[error("cannot expand a level-{from} region to level {to}")]
    LevelError { from: u8, to: u8 },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("coverage {0} is outside [0, 100]")]
    OutOfRange(f64),
    #[error("node {node} is out of range for a graph of {len} nodes")]
    NodeOutOfRange { node: usize, len: usize },
    #[error("expected {expected} probability rows, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// A sorted node set at nearest-neighbour level 0, 1 or 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub level: u8,
    pub nodes: Vec<usize>,
    pub origin: String,
}

impl Region {
    pub fn new(level: u8, mut nodes: Vec<usize>, origin: impl Into<String>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        Region {
            level,
            nodes,
            origin: origin.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.nodes.iter().all(|&n| other.contains(n))
    }
}

/// Nodes with `p(TROJAN) >= threshold`.
pub fn flag_nodes(probs: &[[f64; 2]], threshold: f64) -> Result<Region, LocalizeError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(LocalizeError::BadThreshold(threshold));
    }
    let nodes = probs
        .iter()
        .enumerate()
        .filter(|(_, p)| p[TROJAN] >= threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(Region::new(0, nodes, "flagged"))
}

/// Grows `region` by undirected one-hop frontiers until it reaches `target_level`.
pub fn nn_expand(graph: &CircuitGraph, region: &Region, target_level: u8) -> Result<Region, LocalizeError> {
    if !(1..=2).contains(&target_level) || target_level <= region.level {
        return Err(LocalizeError::LevelError {
            from: region.level,
            to: target_level,
        });
    }
    let n = graph.len();
    if let Some(&bad) = region.nodes.iter().find(|&&v| v >= n) {
        return Err(LocalizeError::NodeOutOfRange { node: bad, len: n });
    }
    let mut seen = vec![false; n];
    for &v in &region.nodes {
        seen[v] = true;
    }
    let mut frontier = region.nodes.clone();
    for _ in region.level..target_level {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in graph.adjacent(v) {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    // Reading the bitmap back yields the members already sorted.
    let members = seen.iter().enumerate().filter(|(_, &s)| s).map(|(v, _)| v).collect();
    Ok(Region::new(target_level, members, region.origin.clone()))
}

/// `100 · |region| / N`.
pub fn coverage(graph: &CircuitGraph, region: &Region) -> Result<f64, LocalizeError> {
    if graph.is_empty() {
        return Err(LocalizeError::EmptyGraph);
    }
    Ok(100.0 * region.len() as f64 / graph.len() as f64)
}

/// Minimum share of inspection time saved: `100 − max_coverage_pct`.
pub fn time_saved(max_coverage_pct: f64) -> Result<f64, LocalizeError> {
    if !(0.0..=100.0).contains(&max_coverage_pct) {
        return Err(LocalizeError::OutOfRange(max_coverage_pct));
    }
    Ok(100.0 - max_coverage_pct)
}

/// Whole-percent display value, truncated toward zero.
pub fn time_saved_display(max_coverage_pct: f64) -> Result<u32, LocalizeError> {
    Ok((time_saved(max_coverage_pct)? + 1e-9).floor() as u32)
}

/// Human-readable form, e.g. `~94%`.
pub fn format_time_saved(max_coverage_pct: f64) -> Result<String, LocalizeError> {
    Ok(format!("~{}%", time_saved_display(max_coverage_pct)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    #[serde(rename = "ref")]
    pub name: String,
    pub line: usize,
}

/// One location per region node, ordered by source line then name.
pub fn map_to_netlist(graph: &CircuitGraph, region: &Region) -> Result<Vec<Location>, LocalizeError> {
    let mut out = Vec::with_capacity(region.len());
    for &v in &region.nodes {
        let (name, line) = graph.source_of(v).map_err(|_| LocalizeError::NodeOutOfRange {
            node: v,
            len: graph.len(),
        })?;
        out.push(Location {
            name: name.to_string(),
            line,
        });
    }
    out.sort_by(|a, b| a.line.cmp(&b.line).then_with(|| a.name.cmp(&b.name)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub r0: Region,
    pub r1: Region,
    pub r2: Region,
    pub matches: Vec<PatternMatch>,
    /// Netlist locations of the region at the reporting level.
    pub locations: Vec<Location>,
    pub coverage_pct: LevelCoverage,
}

impl LocalizationResult {
    pub fn region(&self, level: u8) -> &Region {
        match level {
            0 => &self.r0,
            1 => &self.r1,
            _ => &self.r2,
        }
    }
}

/// Flags, expands, optionally matches against a pattern library, and maps
/// the region at `report_level` back to the netlist.
pub fn localize(
    graph: &CircuitGraph,
    probs: &[[f64; 2]],
    threshold: f64,
    report_level: u8,
    library: Option<&PatternLibrary>,
) -> Result<LocalizationResult, LocalizeError> {
    if probs.len() != graph.len() {
        return Err(LocalizeError::ShapeMismatch {
            expected: graph.len(),
            got: probs.len(),
        });
    }
    if report_level > 2 {
        return Err(LocalizeError::LevelError { from: 0, to: report_level });
    }
    let r0 = flag_nodes(probs, threshold)?;
    let r1 = nn_expand(graph, &r0, 1)?;
    let r2 = nn_expand(graph, &r0, 2)?;
    let matches = library.map(|lib| graph_intersection(graph, lib)).unwrap_or_default();
    let coverage_pct = if graph.is_empty() {
        LevelCoverage { r0: 0.0, r1: 0.0, r2: 0.0 }
    } else {
        LevelCoverage {
            r0: coverage(graph, &r0)?,
            r1: coverage(graph, &r1)?,
            r2: coverage(graph, &r2)?,
        }
    };
    let mut result = LocalizationResult {
        r0,
        r1,
        r2,
        matches,
        locations: Vec::new(),
        coverage_pct,
    };
    result.locations = map_to_netlist(graph, result.region(report_level))?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::netlist::{parse_netlist, GateKind};

    fn path5() -> CircuitGraph {
        CircuitGraph::from_edges(vec![GateKind::Buf; 5], vec![(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap()
    }

    #[test]
    fn flagging() {
        assert!(flag_nodes(&[[1.0, 0.0]; 4], 0.5).unwrap().is_empty());
        let r = flag_nodes(&[[0.6, 0.4], [0.4, 0.6]], 0.5).unwrap();
        assert_eq!(r.nodes, vec![1]);
        assert_eq!(r.level, 0);
        assert_eq!(flag_nodes(&[], 0.0), Err(LocalizeError::BadThreshold(0.0)));
        assert_eq!(flag_nodes(&[], 1.5), Err(LocalizeError::BadThreshold(1.5)));
        assert!(flag_nodes(&[[0.0, 1.0]], 1.0).unwrap().contains(0));
    }

    #[test]
    fn path_expansion() {
        let g = path5();
        // Nodes 1..5 in the usual numbering are ids 0..4 here.
        let r0 = Region::new(0, vec![2], "flagged");
        assert_eq!(nn_expand(&g, &r0, 1).unwrap().nodes, vec![1, 2, 3]);
        assert_eq!(nn_expand(&g, &r0, 2).unwrap().nodes, vec![0, 1, 2, 3, 4]);
        let r1 = nn_expand(&g, &r0, 1).unwrap();
        assert_eq!(nn_expand(&g, &r1, 2).unwrap(), nn_expand(&g, &r0, 2).unwrap());
        assert_eq!(coverage(&g, &r1).unwrap(), 60.0);
    }

    #[test]
    fn star_and_empty() {
        let g = CircuitGraph::from_edges(vec![GateKind::Buf; 5], vec![(0, 1), (0, 2), (3, 0), (4, 0)]).unwrap();
        let r1 = nn_expand(&g, &Region::new(0, vec![0], "flagged"), 1).unwrap();
        assert_eq!(r1.len(), 5);
        let empty = Region::new(0, vec![], "flagged");
        assert!(nn_expand(&g, &empty, 1).unwrap().is_empty());
        assert!(nn_expand(&g, &empty, 2).unwrap().is_empty());
        assert_eq!(coverage(&g, &empty).unwrap(), 0.0);
    }

    #[test]
    fn closure_is_fixpoint() {
        let g = path5();
        let all = Region::new(0, (0..5).collect(), "flagged");
        assert_eq!(nn_expand(&g, &all, 2).unwrap().nodes, all.nodes);
    }

    #[test]
    fn level_errors() {
        let g = path5();
        let r1 = Region::new(1, vec![0], "flagged");
        assert_eq!(nn_expand(&g, &r1, 1), Err(LocalizeError::LevelError { from: 1, to: 1 }));
        assert_eq!(
            nn_expand(&g, &Region::new(0, vec![], "x"), 3),
            Err(LocalizeError::LevelError { from: 0, to: 3 })
        );
        assert!(matches!(
            nn_expand(&g, &Region::new(0, vec![9], "x"), 1),
            Err(LocalizeError::NodeOutOfRange { node: 9, .. })
        ));
        let empty = CircuitGraph::from_edges(vec![], vec![]).unwrap();
        assert_eq!(
            coverage(&empty, &Region::new(0, vec![], "x")),
            Err(LocalizeError::EmptyGraph)
        );
    }

    #[test]
    fn time_saved_values() {
        assert_eq!(time_saved(0.0).unwrap(), 100.0);
        assert_eq!(format_time_saved(50.0).unwrap(), "~50%");
        assert_eq!(format_time_saved(5.4).unwrap(), "~94%");
        assert_eq!(time_saved_display(0.0).unwrap(), 100);
        assert!(matches!(time_saved(100.5), Err(LocalizeError::OutOfRange(_))));
        assert!(matches!(time_saved(-0.1), Err(LocalizeError::OutOfRange(_))));
        assert!(time_saved(10.0).unwrap() > time_saved(10.5).unwrap());
    }

    #[test]
    fn mapping_to_source() {
        let src = "module ha(a, b, s, c);\ninput a, b;\noutput s, c;\nxor x1 (s, a, b);\nand a1 (c, a, b);\nendmodule\n";
        let g = build_graph(&parse_netlist(src, "ha.v").unwrap()).unwrap();
        assert!(map_to_netlist(&g, &Region::new(0, vec![], "x")).unwrap().is_empty());
        let all = Region::new(0, (0..g.len()).collect(), "x");
        let locs = map_to_netlist(&g, &all).unwrap();
        assert_eq!(locs.len(), g.len());
        let x1 = locs.iter().find(|l| l.name == "x1").unwrap();
        assert_eq!(x1.line, 4);
        let b = locs.iter().find(|l| l.name == "b").unwrap();
        assert_eq!(b.line, 2);
        assert!(locs.windows(2).all(|w| w[0].line <= w[1].line));
    }

    #[test]
    fn localize_reports_requested_level() {
        let g = path5();
        let probs = [[0.9, 0.1], [0.9, 0.1], [0.1, 0.9], [0.9, 0.1], [0.9, 0.1]];
        let res = localize(&g, &probs, 0.5, 1, None).unwrap();
        assert_eq!(res.r0.nodes, vec![2]);
        assert_eq!(res.locations.len(), 3);
        assert_eq!(res.coverage_pct.r2, 100.0);
        assert!(res.matches.is_empty());
        assert!(matches!(
            localize(&g, &probs[..2], 0.5, 1, None),
            Err(LocalizeError::ShapeMismatch { .. })
        ));
    }
}
