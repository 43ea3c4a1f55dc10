// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::collections::BTreeMap;

use htscan_core::graph::CircuitGraph;
use htscan_core::netlist::{GateKind, Netlist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FULL_ADDER: &str = "module fa(a, b, cin, s, cout);
input a, b, cin;
output s, cout;
wire x1, a1, a2;
xor g_x1 (x1, a, b);
xor g_s (s, x1, cin);
and g_a1 (a1, a, b);
and g_a2 (a2, x1, cin);
or g_c (cout, a1, a2);
endmodule
";

const GATE_KINDS: [GateKind; 10] = [
    GateKind::And,
    GateKind::Nand,
    GateKind::Or,
    GateKind::Nor,
    GateKind::Xor,
    GateKind::Xnor,
    GateKind::Not,
    GateKind::Buf,
    GateKind::Mux2,
    GateKind::Dff,
];

/// Random graph with every node's degree capped near `max_degree`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, max_degree: usize) -> CircuitGraph {
    let kinds = (0..n).map(|_| GATE_KINDS[rng.gen_range(0..GATE_KINDS.len())]).collect();
    let mut edges = Vec::new();
    if n > 1 {
        for v in 0..n {
            for _ in 0..rng.gen_range(0..=max_degree / 2) {
                edges.push((v, rng.gen_range(0..n)));
            }
        }
    }
    CircuitGraph::from_edges(kinds, edges).expect("edges in range")
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reference evaluation of one gate.
pub fn eval_gate(kind: GateKind, ins: &[bool]) -> bool {
    match kind {
        GateKind::And => ins.iter().all(|&b| b),
        GateKind::Nand => !ins.iter().all(|&b| b),
        GateKind::Or => ins.iter().any(|&b| b),
        GateKind::Nor => !ins.iter().any(|&b| b),
        GateKind::Xor => ins.iter().filter(|&&b| b).count() % 2 == 1,
        GateKind::Xnor => ins.iter().filter(|&&b| b).count() % 2 == 0,
        GateKind::Not => !ins[0],
        GateKind::Buf => ins[0],
        GateKind::Mux2 => {
            if ins[2] {
                ins[1]
            } else {
                ins[0]
            }
        }
        GateKind::Const0 => false,
        GateKind::Const1 => true,
        GateKind::Dff | GateKind::InputPort | GateKind::OutputPort => unreachable!("not combinational"),
    }
}

/// Settles every net of a netlist. Input ports come from `inputs`, DFF
/// outputs read as 0, and nets in `forced` override their drivers.
pub fn simulate(n: &Netlist, inputs: &BTreeMap<String, bool>, forced: &BTreeMap<String, bool>) -> BTreeMap<String, bool> {
    let mut values: BTreeMap<String, bool> = BTreeMap::new();
    for p in &n.input_ports {
        values.insert(p.name.clone(), inputs[&p.name]);
    }
    for g in &n.instances {
        if g.kind == GateKind::Dff {
            values.insert(g.output.clone(), false);
        }
    }
    for (k, v) in forced {
        values.insert(k.clone(), *v);
    }
    loop {
        let mut progressed = false;
        for g in &n.instances {
            if values.contains_key(&g.output) {
                continue;
            }
            let ins: Option<Vec<bool>> = g.inputs.iter().map(|i| values.get(i).copied()).collect();
            if let Some(ins) = ins {
                values.insert(g.output.clone(), eval_gate(g.kind, &ins));
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    values
}

/// Source text of a random valid flat netlist: a DAG of gates over `inputs`
/// primary inputs, with the last `outputs` gates driving output ports.
pub fn random_netlist_text(seed: u64, inputs: usize, gates: usize, outputs: usize) -> String {
    let mut rng = seeded(seed);
    let kinds = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Mux2,
        GateKind::Dff,
        GateKind::Const0,
        GateKind::Const1,
    ];
    let outputs = outputs.min(gates);
    let mut nets: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    let outs: Vec<String> = (0..outputs).map(|i| format!("o{i}")).collect();
    let mut body = String::new();
    let mut wires = Vec::new();
    for j in 0..gates {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let arity = match kind {
            GateKind::Not | GateKind::Buf | GateKind::Dff => 1,
            GateKind::Mux2 => 3,
            GateKind::Const0 | GateKind::Const1 => 0,
            _ => rng.gen_range(2..=3),
        };
        let arity = if nets.is_empty() { 0 } else { arity };
        let kind = if arity == 0 && !matches!(kind, GateKind::Const0 | GateKind::Const1) {
            GateKind::Const1
        } else {
            kind
        };
        let out = if j + outputs >= gates {
            outs[j + outputs - gates].clone()
        } else {
            let w = format!("w{j}");
            wires.push(w.clone());
            w
        };
        let mut pins = vec![out.clone()];
        for _ in 0..arity {
            pins.push(nets[rng.gen_range(0..nets.len())].clone());
        }
        body.push_str(&format!("{} g{j} ({});\n", kind.keyword().unwrap(), pins.join(", ")));
        nets.push(out);
    }
    let ports: Vec<String> = (0..inputs).map(|i| format!("i{i}")).chain(outs.iter().cloned()).collect();
    let mut s = format!("module rnd({});\n", ports.join(", "));
    if inputs > 0 {
        s.push_str(&format!("input {};\n", (0..inputs).map(|i| format!("i{i}")).collect::<Vec<_>>().join(", ")));
    }
    if !outs.is_empty() {
        s.push_str(&format!("output {};\n", outs.join(", ")));
    }
    if !wires.is_empty() {
        s.push_str(&format!("wire {};\n", wires.join(", ")));
    }
    s.push_str(&body);
    s.push_str("endmodule\n");
    s
}
