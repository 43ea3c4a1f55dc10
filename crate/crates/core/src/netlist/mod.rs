// SPDX-License-Identifier: Apache-2.0

//! Structural gate-level netlists.
//!
//! The accepted source language is a small single-bit subset of structural
//! Verilog: `module`/`endmodule`, `input`/`output`/`wire` declarations,
//! primitive gate instantiations written as `kind name (out, in1, ...);` and
//! named-port submodule instantiations. Buses, `assign`, parameters and
//! behavioural code are rejected.

mod emit;
mod flatten;
mod parse;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emit::emit_netlist;
pub use flatten::flatten;
pub use parse::parse_netlist;
pub use validate::{validate, Diagnostic};

/// Gate and port kinds known to the tool.
///
/// The discriminant order is the one-hot layout used by the node features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Mux2,
    Dff,
    Const0,
    Const1,
    InputPort,
    OutputPort,
}

/// Input pin count accepted for a gate kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl GateKind {
    pub const COUNT: usize = 14;

    pub const ALL: [GateKind; GateKind::COUNT] = [
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
        GateKind::InputPort,
        GateKind::OutputPort,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Upper-case name, e.g. `MUX2` or `INPUT_PORT`.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Mux2 => "MUX2",
            GateKind::Dff => "DFF",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
            GateKind::InputPort => "INPUT_PORT",
            GateKind::OutputPort => "OUTPUT_PORT",
        }
    }

    /// Source keyword for instantiable kinds; ports have none.
    pub fn keyword(self) -> Option<&'static str> {
        Some(match self {
            GateKind::And => "and",
            GateKind::Nand => "nand",
            GateKind::Or => "or",
            GateKind::Nor => "nor",
            GateKind::Xor => "xor",
            GateKind::Xnor => "xnor",
            GateKind::Not => "not",
            GateKind::Buf => "buf",
            GateKind::Mux2 => "mux2",
            GateKind::Dff => "dff",
            GateKind::Const0 => "const0",
            GateKind::Const1 => "const1",
            GateKind::InputPort | GateKind::OutputPort => return None,
        })
    }

    /// Accepts the all-lowercase or all-uppercase keyword.
    pub fn from_keyword(word: &str) -> Option<GateKind> {
        let lower = word.to_ascii_lowercase();
        if lower != word && word.to_ascii_uppercase() != word {
            return None;
        }
        GateKind::ALL
            .into_iter()
            .find(|k| k.keyword() == Some(lower.as_str()))
    }

    pub fn arity(self) -> Arity {
        match self {
            GateKind::Not | GateKind::Buf | GateKind::Dff => Arity::Exactly(1),
            GateKind::Mux2 => Arity::Exactly(3),
            GateKind::Const0 | GateKind::Const1 | GateKind::InputPort => Arity::Exactly(0),
            GateKind::OutputPort => Arity::Exactly(1),
            _ => Arity::AtLeast(2),
        }
    }

    pub fn is_port(self) -> bool {
        matches!(self, GateKind::InputPort | GateKind::OutputPort)
    }

    pub fn is_sequential(self) -> bool {
        self == GateKind::Dff
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A top-level port with the line of its `input`/`output` declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub line: usize,
}

impl Port {
    pub fn new(name: impl Into<String>, line: usize) -> Self {
        Port {
            name: name.into(),
            line,
        }
    }
}

/// A primitive gate. `inputs` are ordered pins; for `MUX2` they are `(a, b, sel)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateInstance {
    pub id: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub output: String,
    /// 1-based line in the originating file.
    pub source_line: usize,
}

/// Named-port instantiation of another module, present only before flattening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleInstance {
    pub id: String,
    pub module: String,
    /// `(child port, parent net)` pairs in source order.
    pub connections: Vec<(String, String)>,
    pub source_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Netlist {
    pub name: String,
    pub input_ports: Vec<Port>,
    pub output_ports: Vec<Port>,
    pub instances: Vec<GateInstance>,
    pub submodules: Vec<ModuleInstance>,
    /// Every net name, ports included.
    pub nets: BTreeSet<String>,
    /// Definitions of instantiated modules; empty once flattened.
    pub hierarchy: BTreeMap<String, Netlist>,
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Netlist {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn is_flat(&self) -> bool {
        self.submodules.is_empty() && self.hierarchy.is_empty()
    }

    pub fn is_input(&self, net: &str) -> bool {
        self.input_ports.iter().any(|p| p.name == net)
    }

    pub fn is_output(&self, net: &str) -> bool {
        self.output_ports.iter().any(|p| p.name == net)
    }

    pub fn instance(&self, id: &str) -> Option<&GateInstance> {
        self.instances.iter().find(|g| g.id == id)
    }

    /// Nets that are neither input nor output ports.
    pub fn internal_nets(&self) -> impl Iterator<Item = &String> {
        self.nets
            .iter()
            .filter(move |n| !self.is_input(n) && !self.is_output(n))
    }

    /// Equality ignoring source lines.
    pub fn structurally_eq(&self, other: &Netlist) -> bool {
        fn names(ports: &[Port]) -> Vec<&str> {
            ports.iter().map(|p| p.name.as_str()).collect()
        }
        self.name == other.name
            && names(&self.input_ports) == names(&other.input_ports)
            && names(&self.output_ports) == names(&other.output_ports)
            && self.nets == other.nets
            && self.submodules.len() == other.submodules.len()
            && self.hierarchy.len() == other.hierarchy.len()
            && self.instances.len() == other.instances.len()
            && self
                .instances
                .iter()
                .zip(&other.instances)
                .all(|(a, b)| {
                    a.id == b.id && a.kind == b.kind && a.inputs == b.inputs && a.output == b.output
                })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("{file}:{line}: syntax error at `{token}`: {message}")]
    Syntax {
        file: String,
        line: usize,
        token: String,
        message: String,
    },
    #[error("net `{0}` has more than one driver")]
    MultipleDriver(String),
    #[error("net `{0}` is not declared")]
    UndeclaredNet(String),
    #[error("instance `{0}` has the wrong number of inputs for its kind")]
    Arity(String),
    #[error("duplicate name `{0}`")]
    DuplicateId(String),
    #[error("module `{0}` is not defined")]
    UnknownModule(String),
    #[error("module `{module}` has no port `{port}`")]
    UnknownPort { module: String, port: String },
    #[error("recursive instantiation: {}", .0.join(" -> "))]
    RecursionDetected(Vec<String>),
    #[error("netlist is hierarchical; flatten it first")]
    NotFlat,
}
