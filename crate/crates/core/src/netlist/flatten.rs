// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap};

use super::{GateInstance, Netlist, NetlistError};

/// Inlines every submodule instantiation.
///
/// Child gates and internal nets are renamed `inst/name`; child ports bind to
/// the parent nets they are connected to, and unconnected child ports become
/// fresh `inst/port` nets.
pub fn flatten(netlist: &Netlist) -> Result<Netlist, NetlistError> {
    let mut lib = netlist.hierarchy.clone();
    lib.entry(netlist.name.clone()).or_insert_with(|| Netlist {
        hierarchy: BTreeMap::new(),
        ..netlist.clone()
    });
    let mut stack = vec![netlist.name.clone()];
    let mut out = expand(netlist, &lib, &mut stack)?;
    out.hierarchy.clear();
    Ok(out)
}

fn expand(
    def: &Netlist,
    lib: &BTreeMap<String, Netlist>,
    stack: &mut Vec<String>,
) -> Result<Netlist, NetlistError> {
    let mut out = Netlist {
        name: def.name.clone(),
        input_ports: def.input_ports.clone(),
        output_ports: def.output_ports.clone(),
        nets: def.nets.clone(),
        ..Default::default()
    };
    if def.submodules.is_empty() {
        out.instances = def.instances.clone();
        return Ok(out);
    }

    // Merge local gates and submodule expansions in textual order.
    enum Item<'a> {
        Gate(&'a GateInstance),
        Sub(usize),
    }
    let mut items: Vec<(usize, u8, Item)> = def
        .instances
        .iter()
        .map(|g| (g.source_line, 0, Item::Gate(g)))
        .chain(
            def.submodules
                .iter()
                .enumerate()
                .map(|(i, s)| (s.source_line, 1, Item::Sub(i))),
        )
        .collect();
    items.sort_by_key(|(line, order, _)| (*line, *order));

    for (_, _, item) in items {
        match item {
            Item::Gate(g) => out.instances.push(g.clone()),
            Item::Sub(i) => {
                let sub = &def.submodules[i];
                let child_def = lib
                    .get(&sub.module)
                    .ok_or_else(|| NetlistError::UnknownModule(sub.module.clone()))?;
                if stack.contains(&sub.module) {
                    let mut cycle = stack.clone();
                    cycle.push(sub.module.clone());
                    return Err(NetlistError::RecursionDetected(cycle));
                }
                stack.push(sub.module.clone());
                let child = expand(child_def, lib, stack)?;
                stack.pop();

                let bound: HashMap<&str, &str> = sub
                    .connections
                    .iter()
                    .map(|(p, n)| (p.as_str(), n.as_str()))
                    .collect();
                for port in bound.keys() {
                    if !child.is_input(port) && !child.is_output(port) {
                        return Err(NetlistError::UnknownPort {
                            module: sub.module.clone(),
                            port: port.to_string(),
                        });
                    }
                }
                let rename = |net: &str| -> String {
                    match bound.get(net) {
                        Some(parent) => parent.to_string(),
                        None => format!("{}/{}", sub.id, net),
                    }
                };
                for net in &child.nets {
                    out.nets.insert(rename(net));
                }
                for g in &child.instances {
                    out.instances.push(GateInstance {
                        id: format!("{}/{}", sub.id, g.id),
                        kind: g.kind,
                        inputs: g.inputs.iter().map(|n| rename(n)).collect(),
                        output: rename(&g.output),
                        source_line: g.source_line,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, validate};

    const CHILD_AND_PARENT: &str = "module cell(a, b, y);
input a, b;
output y;
wire t1, t2, t3, t4;
and c1 (t1, a, b);
or c2 (t2, a, b);
xor c3 (t3, t1, t2);
not c4 (t4, t3);
buf c5 (y, t4);
endmodule
module top(x, z, o);
input x, z;
output o;
wire m1, m2;
cell u1 (.a(x), .b(z), .y(m1));
cell u2 (.a(m1), .b(z), .y(m2));
nand g (o, m1, m2);
endmodule
";

    #[test]
    fn flat_input_is_fixpoint() {
        let src = "module m(a, b, y);\ninput a, b;\noutput y;\nwire p, q;\nand g1 (p, a, b);\nor g2 (q, a, b);\nxor g3 (y, p, q);\nendmodule\n";
        let n = parse_netlist(src, "f.v").unwrap();
        let f = flatten(&n).unwrap();
        assert_eq!(f, n);
        assert_eq!(flatten(&f).unwrap(), f);
    }

    #[test]
    fn expands_two_children() {
        let n = parse_netlist(CHILD_AND_PARENT, "h.v").unwrap();
        let f = flatten(&n).unwrap();
        assert!(f.is_flat());
        // 1 local gate + 2 x 5 child gates.
        assert_eq!(f.instances.len(), 11);
        let ids: Vec<&str> = f.instances.iter().map(|g| g.id.as_str()).collect();
        assert_eq!(&ids[..5], &["u1/c1", "u1/c2", "u1/c3", "u1/c4", "u1/c5"]);
        assert_eq!(ids[10], "g");
        let u2c1 = f.instance("u2/c1").unwrap();
        assert_eq!(u2c1.inputs, vec!["m1", "z"]);
        assert_eq!(f.instance("u1/c5").unwrap().output, "m1");
        assert!(f.nets.contains("u2/t3"));
        assert!(validate(&f).is_empty());
    }

    #[test]
    fn unknown_module() {
        let src = "module top(a, y);\ninput a;\noutput y;\nfoo u (.i(a), .o(y));\nendmodule\n";
        let n = parse_netlist(src, "u.v").unwrap();
        assert_eq!(flatten(&n), Err(NetlistError::UnknownModule("foo".into())));
    }

    #[test]
    fn recursion_detected() {
        let src = "module a(i, o);\ninput i;\noutput o;\nb x (.i(i), .o(o));\nendmodule\n\
module b(i, o);\ninput i;\noutput o;\na y (.i(i), .o(o));\nendmodule\n";
        let n = parse_netlist(src, "r.v").unwrap();
        match flatten(&n) {
            Err(NetlistError::RecursionDetected(path)) => {
                assert_eq!(path.first(), path.last());
                assert_eq!(path.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unconnected_child_port_becomes_local_net() {
        let src = "module inv(i, o);\ninput i;\noutput o;\nnot g (o, i);\nendmodule\n\
module top(a);\ninput a;\ninv u (.i(a));\nendmodule\n";
        let f = flatten(&parse_netlist(src, "p.v").unwrap()).unwrap();
        assert_eq!(f.instances[0].output, "u/o");
        assert!(f.nets.contains("u/o"));
    }
}
