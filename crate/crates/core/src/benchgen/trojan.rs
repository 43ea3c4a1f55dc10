// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, Builder};
use crate::netlist::{GateKind, Netlist};

/// Every inserted instance id and net name starts with this prefix.
pub const TROJAN_PREFIX: &str = "tj_";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrojanKind {
    /// Fires when the tapped nets equal `pattern` (bit `k` for tap `k`).
    InputTriggered { pattern: String },
    /// Flips the victim unconditionally.
    AlwaysOn,
    /// A hidden counter advanced by one tapped net fires at a seeded value.
    StateBased { counter_bits: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrojanSpec {
    #[serde(flatten)]
    pub kind: TrojanKind,
    /// Explicit victim net; otherwise one is drawn from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victim: Option<String>,
    pub seed: u64,
}

impl TrojanSpec {
    pub fn input_triggered(pattern: &str, seed: u64) -> Self {
        TrojanSpec {
            kind: TrojanKind::InputTriggered {
                pattern: pattern.to_string(),
            },
            victim: None,
            seed,
        }
    }

    pub fn always_on(seed: u64) -> Self {
        TrojanSpec {
            kind: TrojanKind::AlwaysOn,
            victim: None,
            seed,
        }
    }

    pub fn state_based(counter_bits: usize, seed: u64) -> Self {
        TrojanSpec {
            kind: TrojanKind::StateBased { counter_bits },
            victim: None,
            seed,
        }
    }

    pub fn trigger_width(&self) -> usize {
        match &self.kind {
            TrojanKind::InputTriggered { pattern } => pattern.len(),
            TrojanKind::AlwaysOn => 0,
            TrojanKind::StateBased { .. } => 1,
        }
    }

    fn check(&self) -> Result<(), BenchError> {
        match &self.kind {
            TrojanKind::InputTriggered { pattern } => {
                if pattern.is_empty() {
                    return Err(BenchError::InvalidSpec("trigger width must be at least 1".into()));
                }
                if !pattern.bytes().all(|c| c == b'0' || c == b'1') {
                    return Err(BenchError::InvalidSpec(format!("pattern '{pattern}' is not a bit string")));
                }
            }
            TrojanKind::AlwaysOn => {}
            TrojanKind::StateBased { counter_bits } => {
                if *counter_bits == 0 {
                    return Err(BenchError::InvalidSpec("counter_bits must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// The one rewired connection: `gate.inputs[pin]` moved from `victim` to `payload_net`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splice {
    pub victim: String,
    pub gate: String,
    pub pin: usize,
    pub payload_net: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledCircuit {
    pub netlist: Netlist,
    /// Inserted instance ids in insertion order; empty for clean circuits.
    pub trojan_gate_ids: Vec<String>,
    pub splice: Option<Splice>,
    /// Tapped host nets, in pattern order.
    pub taps: Vec<String>,
}

impl LabeledCircuit {
    pub fn clean(netlist: Netlist) -> Self {
        LabeledCircuit {
            netlist,
            trojan_gate_ids: Vec::new(),
            splice: None,
            taps: Vec::new(),
        }
    }

    pub fn is_infected(&self) -> bool {
        !self.trojan_gate_ids.is_empty()
    }
}

/// Nets reachable from `gate`'s output through combinational gates.
fn combinational_cone(host: &Netlist, gate: usize) -> BTreeSet<String> {
    let mut sinks: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in host.instances.iter().enumerate() {
        for n in &g.inputs {
            sinks.entry(n.as_str()).or_default().push(i);
        }
    }
    let mut cone = BTreeSet::new();
    if host.instances[gate].kind.is_sequential() {
        return cone;
    }
    let mut stack = vec![host.instances[gate].output.as_str()];
    while let Some(net) = stack.pop() {
        if !cone.insert(net.to_string()) {
            continue;
        }
        for &s in sinks.get(net).map(Vec::as_slice).unwrap_or(&[]) {
            let g = &host.instances[s];
            if !g.kind.is_sequential() {
                stack.push(g.output.as_str());
            }
        }
    }
    cone
}

/// Inserts a Trojan whose payload XOR is spliced onto one sink pin of the
/// victim net. Everything else in the host is left as is.
pub fn inject_trojan(clean: &Netlist, spec: &TrojanSpec) -> Result<LabeledCircuit, BenchError> {
    spec.check()?;
    if clean.nets.iter().any(|n| n.starts_with(TROJAN_PREFIX))
        || clean.instances.iter().any(|g| g.id.starts_with(TROJAN_PREFIX))
    {
        return Err(BenchError::InvalidSpec(format!("host already uses the '{TROJAN_PREFIX}' prefix")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Internal nets with at least one gate sink.
    let mut sink_pins: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
    for (i, g) in clean.instances.iter().enumerate() {
        for (p, n) in g.inputs.iter().enumerate() {
            sink_pins.entry(n.as_str()).or_default().push((i, p));
        }
    }
    let internal: Vec<&String> = clean.internal_nets().collect();
    let victim = match &spec.victim {
        Some(v) => {
            if !clean.nets.contains(v) || !sink_pins.contains_key(v.as_str()) {
                return Err(BenchError::VictimNotFound(v.clone()));
            }
            v.clone()
        }
        None => {
            let candidates: Vec<&String> = internal
                .iter()
                .copied()
                .filter(|n| sink_pins.contains_key(n.as_str()))
                .collect();
            candidates
                .choose(&mut rng)
                .map(|s| s.to_string())
                .ok_or_else(|| BenchError::VictimNotFound("no internal net with a sink".into()))?
        }
    };
    let &(sink_gate, pin) = sink_pins[victim.as_str()]
        .choose(&mut rng)
        .expect("victim has a sink");
    let cone = combinational_cone(clean, sink_gate);

    let mut b = Builder::from_netlist(clean.clone());
    let mut ids: Vec<String> = Vec::new();
    let mut add = |b: &mut Builder, kind: GateKind, id: String, out: &str, ins: &[&str]| {
        b.gate(kind, &id, out, ins);
        ids.push(id);
    };
    let payload_net = format!("{TROJAN_PREFIX}v");
    let mut taps = Vec::new();

    let trigger = match &spec.kind {
        TrojanKind::AlwaysOn => {
            add(&mut b, GateKind::Const1, format!("{TROJAN_PREFIX}c"), "tj_one", &[]);
            add(&mut b, GateKind::Buf, format!("{TROJAN_PREFIX}b"), "tj_on", &["tj_one"]);
            "tj_on".to_string()
        }
        TrojanKind::InputTriggered { pattern } => {
            let w = pattern.len();
            let candidates: Vec<&String> = internal
                .iter()
                .copied()
                .filter(|n| !cone.contains(*n) && **n != victim)
                .collect();
            if candidates.len() < w {
                return Err(BenchError::InsufficientNets {
                    needed: w,
                    available: candidates.len(),
                });
            }
            taps = candidates.choose_multiple(&mut rng, w).map(|s| s.to_string()).collect();
            let lits = literals(&mut b, &mut add, &taps, pattern, "n");
            and_chain(&mut b, &mut add, &lits, "a")
        }
        TrojanKind::StateBased { counter_bits } => {
            let k = *counter_bits;
            if internal.is_empty() {
                return Err(BenchError::InsufficientNets { needed: 1, available: 0 });
            }
            let en = internal.choose(&mut rng).expect("non-empty").to_string();
            taps = vec![en.clone()];
            let q: Vec<String> = (0..k).map(|i| format!("{TROJAN_PREFIX}q{i}")).collect();
            let mut carry = en;
            for i in 0..k {
                let d = format!("{TROJAN_PREFIX}d{i}");
                add(&mut b, GateKind::Xor, format!("{TROJAN_PREFIX}inc{i}"), &d, &[&q[i], &carry]);
                add(&mut b, GateKind::Dff, format!("{TROJAN_PREFIX}r{i}"), &q[i], &[&d]);
                if i + 1 < k {
                    let c = format!("{TROJAN_PREFIX}k{i}");
                    add(&mut b, GateKind::And, format!("{TROJAN_PREFIX}cy{i}"), &c, &[&q[i], &carry]);
                    carry = c;
                }
            }
            let target: String = (0..k).map(|_| if rng.gen::<bool>() { '1' } else { '0' }).collect();
            let lits = literals(&mut b, &mut add, &q, &target, "e");
            and_chain(&mut b, &mut add, &lits, "m")
        }
    };
    add(
        &mut b,
        GateKind::Xor,
        format!("{TROJAN_PREFIX}x"),
        &payload_net,
        &[&victim, &trigger],
    );
    let host_gate = clean.instances[sink_gate].id.clone();
    b.netlist_mut().instances[sink_gate].inputs[pin] = payload_net.clone();
    let netlist = b.finish()?;
    Ok(LabeledCircuit {
        netlist,
        trojan_gate_ids: ids,
        splice: Some(Splice {
            victim,
            gate: host_gate,
            pin,
            payload_net,
        }),
        taps,
    })
}

type AddFn<'a> = dyn FnMut(&mut Builder, GateKind, String, &str, &[&str]) + 'a;

/// One literal per bit: the net itself for `1`, an inverter for `0`.
fn literals(b: &mut Builder, add: &mut AddFn<'_>, nets: &[String], bits: &str, tag: &str) -> Vec<String> {
    nets.iter()
        .zip(bits.bytes())
        .enumerate()
        .map(|(k, (net, bit))| {
            if bit == b'1' {
                net.clone()
            } else {
                let out = format!("{TROJAN_PREFIX}{tag}{k}");
                add(b, GateKind::Not, format!("{TROJAN_PREFIX}{tag}{k}"), &out, &[net]);
                out
            }
        })
        .collect()
}

/// `w − 1` two-input ANDs reducing the literals; returns the result net.
fn and_chain(b: &mut Builder, add: &mut AddFn<'_>, lits: &[String], tag: &str) -> String {
    let mut acc = lits[0].clone();
    for (k, lit) in lits.iter().enumerate().skip(1) {
        let out = format!("{TROJAN_PREFIX}{tag}{k}");
        add(b, GateKind::And, format!("{TROJAN_PREFIX}{tag}{k}"), &out, &[&acc, lit]);
        acc = out;
    }
    acc
}
