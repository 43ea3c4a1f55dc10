// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{nn_expand, Region};
use crate::features::wl::wl_rounds;
use crate::graph::CircuitGraph;
use crate::netlist::GateKind;

pub const DEFAULT_TAU: f64 = 0.8;

const SIGNATURE_ITERATIONS: usize = 2;

/// Multiset of WL labels, label → multiplicity.
pub type Signature = BTreeMap<String, usize>;

/// `Σ min / Σ max` over label multiplicities; two empty multisets score 1.
pub fn multiset_jaccard(a: &Signature, b: &Signature) -> f64 {
    let mut min = 0usize;
    let mut max = 0usize;
    for (label, &ca) in a {
        let cb = b.get(label).copied().unwrap_or(0);
        min += ca.min(cb);
        max += ca.max(cb);
    }
    for (label, &cb) in b {
        if !a.contains_key(label) {
            max += cb;
        }
    }
    if max == 0 {
        1.0
    } else {
        min as f64 / max as f64
    }
}

fn two_hop_ball(graph: &CircuitGraph, v: usize) -> Vec<usize> {
    let mut ball = vec![v];
    for &u in graph.adjacent(v) {
        ball.push(u);
        ball.extend_from_slice(graph.adjacent(u));
    }
    ball.sort_unstable();
    ball.dedup();
    ball
}

/// WL labels after two refinements of the subgraph induced by the 2-hop
/// undirected neighbourhood of `v`.
pub fn node_signature(graph: &CircuitGraph, v: usize) -> Signature {
    let ball = two_hop_ball(graph, v);
    let local: HashMap<usize, usize> = ball.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let kinds: Vec<GateKind> = ball.iter().map(|&u| graph.kind(u)).collect();
    let restrict = |list: &[usize]| -> Vec<usize> { list.iter().filter_map(|u| local.get(u).copied()).collect() };
    let ins: Vec<Vec<usize>> = ball.iter().map(|&u| restrict(graph.predecessors(u))).collect();
    let outs: Vec<Vec<usize>> = ball.iter().map(|&u| restrict(graph.successors(u))).collect();
    let rounds = wl_rounds(&kinds, &ins, &outs, SIGNATURE_ITERATIONS);
    let mut sig = Signature::new();
    for label in rounds.last().into_iter().flatten() {
        *sig.entry(label.clone()).or_default() += 1;
    }
    sig
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrojanPattern {
    pub id: String,
    pub signature: Signature,
    pub node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternLibrary {
    pub tau: f64,
    pub patterns: Vec<TrojanPattern>,
}

impl Default for PatternLibrary {
    fn default() -> Self {
        PatternLibrary::new(DEFAULT_TAU)
    }
}

impl PatternLibrary {
    pub fn new(tau: f64) -> Self {
        PatternLibrary {
            tau,
            patterns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Adds the signature of each known Trojan node, skipping signatures
    /// already present. Returns the number of patterns added.
    pub fn add_infected(&mut self, source: &str, graph: &CircuitGraph, trojan_nodes: &[usize]) -> usize {
        let mut added = 0;
        for &v in trojan_nodes {
            let signature = node_signature(graph, v);
            if signature.is_empty() || self.patterns.iter().any(|p| p.signature == signature) {
                continue;
            }
            let node_count = signature.values().sum();
            self.patterns.push(TrojanPattern {
                id: format!("{source}:{}", graph.node(v).name),
                signature,
                node_count,
            });
            added += 1;
        }
        added
    }

    /// Best-scoring pattern for `sig` at or above `tau`; ties keep the earliest.
    pub fn best_match(&self, sig: &Signature) -> Option<(usize, f64)> {
        let size: usize = sig.values().sum();
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.patterns.iter().enumerate() {
            // Jaccard never exceeds the ratio of multiset sizes.
            let (lo, hi) = (size.min(p.node_count), size.max(p.node_count));
            if hi > 0 && (lo as f64) < self.tau * hi as f64 {
                continue;
            }
            let s = multiset_jaccard(sig, &p.signature);
            if s >= self.tau && best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatch {
    pub pattern_id: String,
    pub similarity: f64,
    /// Matched nodes of one connected group.
    pub seeds: Vec<usize>,
    /// The seeds grown by one nearest-neighbour level.
    pub region: Region,
}

/// Matches every node's 2-hop signature against the library and groups the
/// matched nodes into connected regions.
pub fn graph_intersection(graph: &CircuitGraph, library: &PatternLibrary) -> Vec<PatternMatch> {
    if library.is_empty() {
        return Vec::new();
    }
    let hits: BTreeMap<usize, (usize, f64)> = (0..graph.len())
        .filter_map(|v| library.best_match(&node_signature(graph, v)).map(|m| (v, m)))
        .collect();
    let mut seen: BTreeMap<usize, bool> = hits.keys().map(|&v| (v, false)).collect();
    let mut out = Vec::new();
    for &start in hits.keys() {
        if seen[&start] {
            continue;
        }
        let mut group = vec![start];
        seen.insert(start, true);
        let mut i = 0;
        while i < group.len() {
            for &u in graph.adjacent(group[i]) {
                if seen.get(&u) == Some(&false) {
                    seen.insert(u, true);
                    group.push(u);
                }
            }
            i += 1;
        }
        group.sort_unstable();
        let (pi, similarity) = group
            .iter()
            .map(|v| hits[v])
            .fold(None::<(usize, f64)>, |acc, (p, s)| match acc {
                Some((_, b)) if b >= s => acc,
                _ => Some((p, s)),
            })
            .expect("group is non-empty");
        let pattern_id = library.patterns[pi].id.clone();
        let seeds = Region::new(0, group, format!("pattern:{pattern_id}"));
        let region = nn_expand(graph, &seeds, 1).expect("seed nodes are in range");
        out.push(PatternMatch {
            pattern_id,
            similarity,
            seeds: seeds.nodes,
            region,
        });
    }
    out
}
