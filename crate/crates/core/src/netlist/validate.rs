// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GateKind, Netlist};

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    NotFlat,
    DuplicateId { id: String },
    Arity { instance: String },
    UndeclaredNet { net: String },
    MultipleDriver { net: String, drivers: Vec<String> },
    FloatingInput { instance: String, net: String },
    UndrivenOutput { port: String },
    DanglingNet { net: String },
    CombinationalCycle { instances: Vec<String> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NotFlat => write!(f, "netlist is not flat"),
            Diagnostic::DuplicateId { id } => write!(f, "duplicate name `{id}`"),
            Diagnostic::Arity { instance } => write!(f, "`{instance}` has the wrong input count"),
            Diagnostic::UndeclaredNet { net } => write!(f, "net `{net}` is not declared"),
            Diagnostic::MultipleDriver { net, drivers } => {
                write!(f, "net `{net}` driven by {}", drivers.join(", "))
            }
            Diagnostic::FloatingInput { instance, net } => {
                write!(f, "input `{net}` of `{instance}` has no driver")
            }
            Diagnostic::UndrivenOutput { port } => write!(f, "output port `{port}` has no driver"),
            Diagnostic::DanglingNet { net } => write!(f, "net `{net}` is unconnected"),
            Diagnostic::CombinationalCycle { instances } => {
                write!(f, "combinational cycle through {}", instances.join(", "))
            }
        }
    }
}

/// Reports every invariant violation; an empty result means the netlist is
/// fit for graph construction.
pub fn validate(netlist: &Netlist) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if !netlist.is_flat() {
        diags.push(Diagnostic::NotFlat);
    }

    let mut seen = HashSet::new();
    for g in &netlist.instances {
        if !seen.insert(g.id.as_str()) {
            diags.push(Diagnostic::DuplicateId { id: g.id.clone() });
        }
        if g.kind.is_port() || !g.kind.arity().accepts(g.inputs.len()) {
            diags.push(Diagnostic::Arity {
                instance: g.id.clone(),
            });
        }
    }

    let mut undeclared = Vec::new();
    let mut note = |net: &str| {
        if !netlist.nets.contains(net) && !undeclared.iter().any(|n: &String| n == net) {
            undeclared.push(net.to_string());
        }
    };
    for p in netlist.input_ports.iter().chain(&netlist.output_ports) {
        note(&p.name);
    }
    for g in &netlist.instances {
        note(&g.output);
        g.inputs.iter().for_each(|n| note(n));
    }
    diags.extend(undeclared.into_iter().map(|net| Diagnostic::UndeclaredNet { net }));

    // Drivers per net, in source order.
    let mut drivers: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for p in &netlist.input_ports {
        drivers.entry(&p.name).or_default().push(p.name.clone());
    }
    for g in &netlist.instances {
        drivers.entry(&g.output).or_default().push(g.id.clone());
    }
    for (net, ds) in &drivers {
        if ds.len() > 1 {
            diags.push(Diagnostic::MultipleDriver {
                net: net.to_string(),
                drivers: ds.clone(),
            });
        }
    }

    let mut has_sink: HashSet<&str> = HashSet::new();
    for g in &netlist.instances {
        for net in &g.inputs {
            has_sink.insert(net);
            if !drivers.contains_key(net.as_str()) {
                diags.push(Diagnostic::FloatingInput {
                    instance: g.id.clone(),
                    net: net.clone(),
                });
            }
        }
    }
    for p in &netlist.output_ports {
        has_sink.insert(&p.name);
        if !drivers.contains_key(p.name.as_str()) {
            diags.push(Diagnostic::UndrivenOutput {
                port: p.name.clone(),
            });
        }
    }
    for net in &netlist.nets {
        if !drivers.contains_key(net.as_str()) && !has_sink.contains(net.as_str()) {
            diags.push(Diagnostic::DanglingNet { net: net.clone() });
        }
    }

    for cycle in combinational_cycles(netlist) {
        diags.push(Diagnostic::CombinationalCycle { instances: cycle });
    }
    diags
}

/// Strongly connected components of the gate graph with DFF outputs cut.
fn combinational_cycles(netlist: &Netlist) -> Vec<Vec<String>> {
    let n = netlist.instances.len();
    let mut driver_of: HashMap<&str, usize> = HashMap::new();
    for (i, g) in netlist.instances.iter().enumerate() {
        driver_of.entry(g.output.as_str()).or_insert(i);
    }
    let mut succ = vec![Vec::new(); n];
    for (j, g) in netlist.instances.iter().enumerate() {
        for net in &g.inputs {
            if let Some(&i) = driver_of.get(net.as_str()) {
                if netlist.instances[i].kind != GateKind::Dff {
                    succ[i].push(j);
                }
            }
        }
    }

    // Iterative Tarjan.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            if *k < succ[v].len() {
                let w = succ[v][*k];
                *k += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    let self_loop = comp.len() == 1 && succ[v].contains(&v);
                    if comp.len() > 1 || self_loop {
                        comp.sort_unstable();
                        out.push(
                            comp.into_iter()
                                .map(|i| netlist.instances[i].id.clone())
                                .collect(),
                        );
                    }
                }
            }
        }
    }
    out.sort();
    out
}
