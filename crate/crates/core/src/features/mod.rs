// SPDX-License-Identifier: Apache-2.0

//! Per-node feature rows, whole-graph embeddings and PCA.

pub(crate) mod pca;
pub(crate) mod wl;

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::CircuitGraph;
use crate::linalg::Matrix;
use crate::netlist::GateKind;

pub use pca::{fit_pca, pca_transform, PcaModel};
pub use wl::{fnv1a64, wl_embed, wl_labels, GraphEmbedding, EMBEDDING_DIM, DEFAULT_WL_ITERATIONS};

/// Width of a node feature row.
pub const NODE_FEATURE_DIM: usize = GateKind::COUNT + 6;

/// Column offsets after the one-hot kind block.
pub mod column {
    use crate::netlist::GateKind;
    pub const FAN_IN: usize = GateKind::COUNT;
    pub const FAN_OUT: usize = GateKind::COUNT + 1;
    pub const DIST_INPUT: usize = GateKind::COUNT + 2;
    pub const DIST_OUTPUT: usize = GateKind::COUNT + 3;
    pub const MEAN_NEIGHBOUR_FAN_IN: usize = GateKind::COUNT + 4;
    pub const MEAN_NEIGHBOUR_FAN_OUT: usize = GateKind::COUNT + 5;
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("need at least two samples, got {0}")]
    DegenerateData(usize),
    #[error("k = {k} exceeds the limit {limit}")]
    KTooLarge { k: usize, limit: usize },
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// N x 20 feature matrix: one-hot kind, fan-in, fan-out, undirected hop
/// distance to the nearest input port and output port (-1 if unreachable),
/// and the mean fan-in / fan-out of undirected neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures(pub Matrix);

impl NodeFeatures {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn row(&self, node: usize) -> &[f64] {
        self.0.row(node)
    }
}

pub fn node_features(graph: &CircuitGraph) -> NodeFeatures {
    let n = graph.len();
    let mut m = Matrix::zeros(n, NODE_FEATURE_DIM);
    let dist_in = multi_source_bfs(graph, GateKind::InputPort);
    let dist_out = multi_source_bfs(graph, GateKind::OutputPort);
    for v in 0..n {
        let row = m.row_mut(v);
        row[graph.kind(v).index()] = 1.0;
        row[column::FAN_IN] = graph.predecessors(v).len() as f64;
        row[column::FAN_OUT] = graph.successors(v).len() as f64;
        row[column::DIST_INPUT] = dist_in[v].map_or(-1.0, |d| d as f64);
        row[column::DIST_OUTPUT] = dist_out[v].map_or(-1.0, |d| d as f64);
        let adj = graph.adjacent(v);
        if !adj.is_empty() {
            let k = adj.len() as f64;
            row[column::MEAN_NEIGHBOUR_FAN_IN] =
                adj.iter().map(|&u| graph.predecessors(u).len() as f64).sum::<f64>() / k;
            row[column::MEAN_NEIGHBOUR_FAN_OUT] =
                adj.iter().map(|&u| graph.successors(u).len() as f64).sum::<f64>() / k;
        }
    }
    NodeFeatures(m)
}

/// Undirected hop distance from the nearest node of `source` kind.
pub(crate) fn multi_source_bfs(graph: &CircuitGraph, source: GateKind) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.len()];
    let mut queue = VecDeque::new();
    for v in 0..graph.len() {
        if graph.kind(v) == source {
            dist[v] = Some(0);
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &u in graph.adjacent(v) {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}
