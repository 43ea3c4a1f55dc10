// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_json, EvalError};
use crate::benchgen::Manifest;
use crate::graph::{build_graph, CircuitGraph};
use crate::ml::{NON_TROJAN, TROJAN};
use crate::netlist::{flatten, parse_netlist, Netlist};

/// A parsed, flattened circuit with its graph and ground truth.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub name: String,
    pub netlist: Netlist,
    pub graph: CircuitGraph,
    /// Instance ids of inserted Trojan gates; empty when clean or unknown.
    pub trojan_ids: BTreeSet<String>,
}

impl Circuit {
    pub fn from_netlist(name: &str, netlist: &Netlist, trojan_ids: impl IntoIterator<Item = String>) -> Result<Self, EvalError> {
        let netlist = if netlist.is_flat() {
            netlist.clone()
        } else {
            flatten(netlist).map_err(|e| EvalError::circuit(name, e))?
        };
        let graph = build_graph(&netlist).map_err(|e| EvalError::circuit(name, e))?;
        let trojan_ids: BTreeSet<String> = trojan_ids.into_iter().collect();
        if let Some(missing) = trojan_ids.iter().find(|id| netlist.instance(id).is_none()) {
            return Err(EvalError::circuit(name, format!("label '{missing}' names no instance")));
        }
        Ok(Circuit {
            name: name.to_string(),
            netlist,
            graph,
            trojan_ids,
        })
    }

    pub fn is_infected(&self) -> bool {
        !self.trojan_ids.is_empty()
    }

    pub fn graph_label(&self) -> usize {
        if self.is_infected() {
            TROJAN
        } else {
            NON_TROJAN
        }
    }

    /// Per graph node: `TROJAN` exactly for nodes whose ref is a labelled instance.
    pub fn node_labels(&self) -> Vec<usize> {
        self.graph
            .nodes()
            .iter()
            .map(|n| {
                if !n.kind.is_port() && self.trojan_ids.contains(&n.name) {
                    TROJAN
                } else {
                    NON_TROJAN
                }
            })
            .collect()
    }
}

/// Parses a netlist file; the circuit is named after the file stem.
pub fn load_circuit(path: &Path, trojan_ids: impl IntoIterator<Item = String>) -> Result<Circuit, EvalError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let netlist = parse_netlist(&text, &path.display().to_string()).map_err(|e| EvalError::circuit(&name, e))?;
    Circuit::from_netlist(&name, &netlist, trojan_ids)
}

/// `{circuit name: [instance ids]}`.
pub fn load_labels(path: &Path) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    read_json(path)
}

/// Loads every circuit of a suite manifest, with labels from the
/// `labels.json` next to it.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<Circuit>, EvalError> {
    let manifest: Manifest = read_json(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let labels = load_labels(&root.join("labels.json"))?;
    manifest
        .circuits
        .iter()
        .map(|entry| {
            let ids = labels
                .get(&entry.name)
                .ok_or_else(|| EvalError::MissingLabels(entry.name.clone()))?;
            let mut c = load_circuit(&root.join(&entry.path), ids.iter().cloned())?;
            c.name = entry.name.clone();
            Ok(c)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, first `⌊fraction · n⌋` to training; both halves sorted.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n as f64) + 1e-9).floor() as usize;
    let mut train = idx[..n_train.min(n)].to_vec();
    let mut test = idx[n_train.min(n)..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}
