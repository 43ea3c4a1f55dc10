// SPDX-License-Identifier: Apache-2.0

//! Weisfeiler-Lehman subtree labels hashed into a fixed-width graph vector.

use crate::graph::CircuitGraph;
use crate::netlist::GateKind;

pub const EMBEDDING_DIM: usize = 256;
pub const DEFAULT_WL_ITERATIONS: usize = 3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// ℓ2-normalised WL histogram (all zeros for an empty graph).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding(pub Vec<f64>);

impl GraphEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One relabelling step: the new label is the hex FNV-1a hash of
/// `prev(in1,in2,...;out1,out2,...)` with both neighbour lists sorted.
pub(crate) fn refine(prev: &[String], ins: &[Vec<usize>], outs: &[Vec<usize>]) -> Vec<String> {
    (0..prev.len())
        .map(|v| {
            let mut i: Vec<&str> = ins[v].iter().map(|&u| prev[u].as_str()).collect();
            let mut o: Vec<&str> = outs[v].iter().map(|&u| prev[u].as_str()).collect();
            i.sort_unstable();
            o.sort_unstable();
            let s = format!("{}({};{})", prev[v], i.join(","), o.join(","));
            format!("{:016x}", fnv1a64(s.as_bytes()))
        })
        .collect()
}

pub(crate) fn wl_rounds(
    kinds: &[GateKind],
    ins: &[Vec<usize>],
    outs: &[Vec<usize>],
    iterations: usize,
) -> Vec<Vec<String>> {
    let mut rounds = vec![kinds.iter().map(|k| k.name().to_string()).collect::<Vec<_>>()];
    for _ in 0..iterations {
        let next = refine(rounds.last().unwrap(), ins, outs);
        rounds.push(next);
    }
    rounds
}

/// Labels per round (`iterations + 1` rounds), indexed `[round][node]`.
pub fn wl_labels(graph: &CircuitGraph, iterations: usize) -> Vec<Vec<String>> {
    let kinds: Vec<GateKind> = graph.nodes().iter().map(|n| n.kind).collect();
    let ins: Vec<Vec<usize>> = (0..graph.len()).map(|v| graph.predecessors(v).to_vec()).collect();
    let outs: Vec<Vec<usize>> = (0..graph.len()).map(|v| graph.successors(v).to_vec()).collect();
    wl_rounds(&kinds, &ins, &outs, iterations)
}

/// Each `(round, label)` entry adds 1 to bucket `fnv1a64("round:label") % dim`.
pub fn wl_embed(graph: &CircuitGraph, iterations: usize, dim: usize) -> GraphEmbedding {
    let mut acc = vec![0.0; dim];
    if dim == 0 {
        return GraphEmbedding(acc);
    }
    for (round, labels) in wl_labels(graph, iterations).iter().enumerate() {
        for label in labels {
            let key = format!("{round}:{label}");
            acc[(fnv1a64(key.as_bytes()) % dim as u64) as usize] += 1.0;
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    GraphEmbedding(acc)
}
