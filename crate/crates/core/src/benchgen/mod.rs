// SPDX-License-Identifier: Apache-2.0

//! Synthetic benchmark circuits: clean template netlists, Trojan insertion
//! with exact gate labels, and on-disk suites.

mod suite;
mod trojan;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{emit_netlist, parse_netlist, GateInstance, GateKind, Netlist, Port};

pub use suite::{gen_suite, generate_suite, GeneratedCircuit, Manifest, ManifestEntry, SuiteConfig, TrojanFamily};
pub use trojan::{inject_trojan, LabeledCircuit, Splice, TrojanKind, TrojanSpec, TROJAN_PREFIX};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("template size must be at least 1, got {0}")]
    BadSize(usize),
    #[error("invalid Trojan spec: {0}")]
    InvalidSpec(String),
    #[error("victim net not found: {0}")]
    VictimNotFound(String),
    #[error("need {needed} candidate nets, host has {available}")]
    InsufficientNets { needed: usize, available: usize },
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("generated netlist failed to re-parse: {0}")]
    Netlist(#[from] crate::netlist::NetlistError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Adder,
    Counter,
    Alu,
    Lfsr,
}

impl Template {
    pub const ALL: [Template; 4] = [Template::Adder, Template::Counter, Template::Alu, Template::Lfsr];

    pub fn name(self) -> &'static str {
        match self {
            Template::Adder => "adder",
            Template::Counter => "counter",
            Template::Alu => "alu",
            Template::Lfsr => "lfsr",
        }
    }

    /// Instances produced at a given bit width.
    pub fn gate_count(self, size: usize) -> usize {
        match self {
            Template::Adder => 5 * size,
            Template::Counter => size + 1 + (size - 1) + size.saturating_sub(2),
            Template::Alu => 9 * size,
            Template::Lfsr => size + if size >= 2 { 2 } else { 1 },
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| BenchError::UnknownTemplate(s.to_string()))
    }
}

/// Incremental netlist construction; line numbers are assigned by
/// [`Builder::finish`], which emits and re-parses the text.
pub(crate) struct Builder {
    nl: Netlist,
}

impl Builder {
    pub(crate) fn new(name: &str) -> Self {
        Builder { nl: Netlist::new(name) }
    }

    pub(crate) fn from_netlist(nl: Netlist) -> Self {
        Builder { nl }
    }

    pub(crate) fn input(&mut self, net: &str) {
        self.nl.input_ports.push(Port::new(net, 0));
        self.nl.nets.insert(net.to_string());
    }

    pub(crate) fn output(&mut self, net: &str) {
        self.nl.output_ports.push(Port::new(net, 0));
        self.nl.nets.insert(net.to_string());
    }

    pub(crate) fn gate(&mut self, kind: GateKind, id: &str, out: &str, ins: &[&str]) {
        self.nl.nets.insert(out.to_string());
        for n in ins {
            self.nl.nets.insert(n.to_string());
        }
        self.nl.instances.push(GateInstance {
            id: id.to_string(),
            kind,
            inputs: ins.iter().map(|s| s.to_string()).collect(),
            output: out.to_string(),
            source_line: 0,
        });
    }

    pub(crate) fn netlist_mut(&mut self) -> &mut Netlist {
        &mut self.nl
    }

    pub(crate) fn finish(self) -> Result<Netlist, BenchError> {
        let text = emit_netlist(&self.nl)?;
        Ok(parse_netlist(&text, &format!("{}.v", self.nl.name))?)
    }
}

/// A clean circuit of the given template family and bit width.
///
/// The seed only matters for `lfsr`, where it picks the feedback tap.
pub fn gen_clean(template: Template, size: usize, seed: u64) -> Result<Netlist, BenchError> {
    gen_clean_named(template, size, seed, &format!("{template}{size}"))
}

pub(crate) fn gen_clean_named(template: Template, size: usize, seed: u64, name: &str) -> Result<Netlist, BenchError> {
    if size == 0 {
        return Err(BenchError::BadSize(size));
    }
    let mut b = Builder::new(name);
    match template {
        Template::Adder => adder(&mut b, size),
        Template::Counter => counter(&mut b, size),
        Template::Alu => alu(&mut b, size),
        Template::Lfsr => lfsr(&mut b, size, seed),
    }
    b.finish()
}

fn adder(b: &mut Builder, n: usize) {
    for i in 0..n {
        b.input(&format!("a{i}"));
        b.input(&format!("b{i}"));
    }
    b.input("cin");
    for i in 0..n {
        b.output(&format!("s{i}"));
    }
    b.output("cout");
    let carry = |i: usize| match i {
        0 => "cin".to_string(),
        i if i == n => "cout".to_string(),
        i => format!("c{i}"),
    };
    for i in 0..n {
        let (a, bb, p, g, t) = (
            format!("a{i}"),
            format!("b{i}"),
            format!("p{i}"),
            format!("g{i}"),
            format!("t{i}"),
        );
        let (c, s, co) = (carry(i), format!("s{i}"), carry(i + 1));
        b.gate(GateKind::Xor, &format!("x1_{i}"), &p, &[&a, &bb]);
        b.gate(GateKind::Xor, &format!("x2_{i}"), &s, &[&p, &c]);
        b.gate(GateKind::And, &format!("a1_{i}"), &g, &[&a, &bb]);
        b.gate(GateKind::And, &format!("a2_{i}"), &t, &[&p, &c]);
        b.gate(GateKind::Or, &format!("o1_{i}"), &co, &[&g, &t]);
    }
}

fn counter(b: &mut Builder, n: usize) {
    for i in 0..n {
        b.output(&format!("q{i}"));
    }
    b.gate(GateKind::Not, "inv0", "d0", &["q0"]);
    b.gate(GateKind::Dff, "r0", "q0", &["d0"]);
    for i in 1..n {
        // Toggle when all lower bits are set; c1 is q0 itself.
        let c = if i == 1 { "q0".to_string() } else { format!("c{i}") };
        if i >= 2 {
            let prev = if i == 2 { "q0".to_string() } else { format!("c{}", i - 1) };
            b.gate(GateKind::And, &format!("ca{i}"), &c, &[&prev, &format!("q{}", i - 1)]);
        }
        let (q, d) = (format!("q{i}"), format!("d{i}"));
        b.gate(GateKind::Xor, &format!("tx{i}"), &d, &[&q, &c]);
        b.gate(GateKind::Dff, &format!("r{i}"), &q, &[&d]);
    }
}

fn alu(b: &mut Builder, n: usize) {
    for i in 0..n {
        b.input(&format!("a{i}"));
        b.input(&format!("b{i}"));
    }
    b.input("s0");
    b.input("s1");
    b.input("cin");
    for i in 0..n {
        b.output(&format!("y{i}"));
    }
    b.output("cout");
    let carry = |i: usize| match i {
        0 => "cin".to_string(),
        i if i == n => "cout".to_string(),
        i => format!("c{i}"),
    };
    for i in 0..n {
        let a = format!("a{i}");
        let bb = format!("b{i}");
        let net = |p: &str| format!("{p}{i}");
        let (c, co) = (carry(i), carry(i + 1));
        b.gate(GateKind::And, &format!("u_and{i}"), &net("an"), &[&a, &bb]);
        b.gate(GateKind::Or, &format!("u_or{i}"), &net("or"), &[&a, &bb]);
        b.gate(GateKind::Xor, &format!("u_xor{i}"), &net("xr"), &[&a, &bb]);
        b.gate(GateKind::Xor, &format!("u_sum{i}"), &net("sm"), &[&net("xr"), &c]);
        b.gate(GateKind::And, &format!("u_pc{i}"), &net("pc"), &[&net("xr"), &c]);
        b.gate(GateKind::Or, &format!("u_co{i}"), &co, &[&net("an"), &net("pc")]);
        b.gate(GateKind::Mux2, &format!("m_lo{i}"), &net("lo"), &[&net("an"), &net("or"), "s0"]);
        b.gate(GateKind::Mux2, &format!("m_hi{i}"), &net("hi"), &[&net("xr"), &net("sm"), "s0"]);
        b.gate(GateKind::Mux2, &format!("m_y{i}"), &net("y"), &[&net("lo"), &net("hi"), "s1"]);
    }
}

fn lfsr(b: &mut Builder, n: usize, seed: u64) {
    b.input("din");
    for i in 0..n {
        b.output(&format!("q{i}"));
    }
    let last = format!("q{}", n - 1);
    let fb = if n >= 2 {
        let tap = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n - 1);
        b.gate(GateKind::Xor, "fb", "f", &[&last, &format!("q{tap}")]);
        "f".to_string()
    } else {
        last
    };
    b.gate(GateKind::Xor, "fin", "d0", &[&fb, "din"]);
    b.gate(GateKind::Dff, "r0", "q0", &["d0"]);
    for i in 1..n {
        b.gate(GateKind::Dff, &format!("r{i}"), &format!("q{i}"), &[&format!("q{}", i - 1)]);
    }
}
