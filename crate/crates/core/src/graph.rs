// SPDX-License-Identifier: Apache-2.0

//! Directed circuit graph built from a flat netlist.
//!
//! Nodes are ports (inputs, then outputs, in declaration order) followed by
//! gate instances in textual order. There is one edge per connected input
//! pin, from the driver of the net to the sink. Adjacency lists are
//! deduplicated and exclude self-loops.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{validate, Diagnostic, GateKind, Netlist};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: GateKind,
    /// Instance id or port name.
    #[serde(rename = "ref")]
    pub name: String,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
    Both,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("netlist is not valid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidNetlist(Vec<Diagnostic>),
    #[error("node {node} out of range (graph has {len} nodes)")]
    NodeOutOfRange { node: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<(usize, usize)>,
    fwd: Vec<Vec<usize>>,
    rev: Vec<Vec<usize>>,
    und_offsets: Vec<usize>,
    und: Vec<usize>,
    by_name: HashMap<String, usize>,
}

impl CircuitGraph {
    /// Builds a graph from explicit nodes and edges.
    pub fn from_parts(nodes: Vec<GraphNode>, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let n = nodes.len();
        let mut fwd = vec![Vec::new(); n];
        let mut rev = vec![Vec::new(); n];
        for &(s, d) in &edges {
            for v in [s, d] {
                if v >= n {
                    return Err(GraphError::NodeOutOfRange { node: v, len: n });
                }
            }
            if s != d {
                fwd[s].push(d);
                rev[d].push(s);
            }
        }
        let mut und_offsets = Vec::with_capacity(n + 1);
        let mut und = Vec::new();
        und_offsets.push(0);
        for v in 0..n {
            fwd[v].sort_unstable();
            fwd[v].dedup();
            rev[v].sort_unstable();
            rev[v].dedup();
            und.extend(merge_sorted(&fwd[v], &rev[v]));
            und_offsets.push(und.len());
        }
        let by_name = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| (node.name.clone(), i))
            .collect();
        Ok(CircuitGraph {
            nodes,
            edges,
            fwd,
            rev,
            und_offsets,
            und,
            by_name,
        })
    }

    /// Synthetic graph with nodes named `n<i>`; used for tests and benchmarks.
    pub fn from_edges(kinds: Vec<GateKind>, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let nodes = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| GraphNode {
                kind,
                name: format!("n{i}"),
                line: 0,
            })
            .collect();
        CircuitGraph::from_parts(nodes, edges)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &GraphNode {
        &self.nodes[id]
    }

    pub fn kind(&self, id: usize) -> GateKind {
        self.nodes[id].kind
    }

    /// Per-pin edges, driver first.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.fwd[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.rev[v]
    }

    /// Undirected adjacency.
    pub fn adjacent(&self, v: usize) -> &[usize] {
        &self.und[self.und_offsets[v]..self.und_offsets[v + 1]]
    }

    pub fn node_by_ref(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn neighbours(&self, node: usize, direction: Direction) -> Result<&[usize], GraphError> {
        self.check(node)?;
        Ok(match direction {
            Direction::In => &self.rev[node],
            Direction::Out => &self.fwd[node],
            Direction::Both => self.adjacent(node),
        })
    }

    pub fn source_of(&self, node: usize) -> Result<(&str, usize), GraphError> {
        self.check(node)?;
        let n = &self.nodes[node];
        Ok((n.name.as_str(), n.line))
    }

    fn check(&self, node: usize) -> Result<(), GraphError> {
        if node < self.nodes.len() {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange {
                node,
                len: self.nodes.len(),
            })
        }
    }

    /// Topological order of the combinational subgraph (edges leaving DFFs
    /// removed), or `None` if it has a cycle.
    pub fn combinational_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indeg = vec![0usize; n];
        let comb = |s: usize| self.nodes[s].kind != GateKind::Dff;
        for &(s, d) in &self.edges {
            if comb(s) {
                indeg[d] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        // Per-pin successors are needed here because indegrees count pins.
        let mut succ = vec![Vec::new(); n];
        for &(s, d) in &self.edges {
            if comb(s) {
                succ[s].push(d);
            }
        }
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(v);
            for &w in &succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| NodeJson {
                    id,
                    kind: n.kind,
                    name: n.name.clone(),
                    line: n.line,
                })
                .collect(),
            edges: self.edges.iter().map(|&(s, d)| [s, d]).collect(),
        }
    }
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Converts a flat, valid netlist into its circuit graph.
pub fn build_graph(netlist: &Netlist) -> Result<CircuitGraph, GraphError> {
    let diags = validate(netlist);
    if !diags.is_empty() {
        return Err(GraphError::InvalidNetlist(diags));
    }
    let mut nodes = Vec::with_capacity(
        netlist.input_ports.len() + netlist.output_ports.len() + netlist.instances.len(),
    );
    for p in &netlist.input_ports {
        nodes.push(GraphNode {
            kind: GateKind::InputPort,
            name: p.name.clone(),
            line: p.line,
        });
    }
    for p in &netlist.output_ports {
        nodes.push(GraphNode {
            kind: GateKind::OutputPort,
            name: p.name.clone(),
            line: p.line,
        });
    }
    let first_gate = nodes.len();
    for g in &netlist.instances {
        nodes.push(GraphNode {
            kind: g.kind,
            name: g.id.clone(),
            line: g.source_line,
        });
    }

    let mut driver: HashMap<&str, usize> = HashMap::new();
    for (i, p) in netlist.input_ports.iter().enumerate() {
        driver.insert(&p.name, i);
    }
    for (i, g) in netlist.instances.iter().enumerate() {
        driver.insert(&g.output, first_gate + i);
    }

    let mut edges = Vec::new();
    for (i, g) in netlist.instances.iter().enumerate() {
        for net in &g.inputs {
            edges.push((driver[net.as_str()], first_gate + i));
        }
    }
    for (i, p) in netlist.output_ports.iter().enumerate() {
        edges.push((driver[p.name.as_str()], netlist.input_ports.len() + i));
    }
    edges.sort_unstable();
    CircuitGraph::from_parts(nodes, edges)
}

/// Node colouring used by the DOT export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeCategory {
    TruePositive,
    TrueNegative,
    FalsePositive,
    FalseNegative,
    /// Region grown around flagged nodes by one hop.
    Neighbour,
    /// Flagged without ground truth to compare against.
    Flagged,
}

impl NodeCategory {
    pub fn color(self) -> &'static str {
        match self {
            NodeCategory::TruePositive => "blue",
            NodeCategory::TrueNegative => "red",
            NodeCategory::FalsePositive => "pink",
            NodeCategory::FalseNegative => "green",
            NodeCategory::Neighbour => "yellow",
            NodeCategory::Flagged => "orange",
        }
    }
}

/// Graphviz export with category fill colours; uncategorised nodes keep the
/// default style.
pub fn to_dot(graph: &CircuitGraph, categories: &BTreeMap<usize, NodeCategory>) -> String {
    let mut s = String::from("digraph circuit {\n  node [shape=box];\n");
    for (i, n) in graph.nodes.iter().enumerate() {
        let label = format!("{}\\n{}", n.name, n.kind.name());
        match categories.get(&i) {
            Some(c) => writeln!(
                s,
                "  n{i} [label=\"{label}\", style=filled, fillcolor={}];",
                c.color()
            )
            .unwrap(),
            None => writeln!(s, "  n{i} [label=\"{label}\"];").unwrap(),
        }
    }
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in &graph.edges {
        if seen.insert((a, b)) {
            writeln!(s, "  n{a} -> n{b};").unwrap();
        }
    }
    s.push_str("}\n");
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: usize,
    pub kind: GateKind,
    #[serde(rename = "ref")]
    pub name: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<[usize; 2]>,
}
