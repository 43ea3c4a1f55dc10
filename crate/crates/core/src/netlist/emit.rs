// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::{Netlist, NetlistError};

/// Writes a flat netlist back out in the accepted grammar.
///
/// Ports are listed inputs first; internal wires follow in sorted order.
pub fn emit_netlist(netlist: &Netlist) -> Result<String, NetlistError> {
    if !netlist.is_flat() {
        return Err(NetlistError::NotFlat);
    }
    let mut s = String::new();
    let ports: Vec<&str> = netlist
        .input_ports
        .iter()
        .chain(&netlist.output_ports)
        .map(|p| p.name.as_str())
        .collect();
    if ports.is_empty() {
        writeln!(s, "module {};", netlist.name).unwrap();
    } else {
        writeln!(s, "module {}({});", netlist.name, ports.join(", ")).unwrap();
    }
    if !netlist.input_ports.is_empty() {
        let names: Vec<&str> = netlist.input_ports.iter().map(|p| p.name.as_str()).collect();
        writeln!(s, "  input {};", names.join(", ")).unwrap();
    }
    if !netlist.output_ports.is_empty() {
        let names: Vec<&str> = netlist.output_ports.iter().map(|p| p.name.as_str()).collect();
        writeln!(s, "  output {};", names.join(", ")).unwrap();
    }
    let wires: Vec<&str> = netlist.internal_nets().map(String::as_str).collect();
    if !wires.is_empty() {
        writeln!(s, "  wire {};", wires.join(", ")).unwrap();
    }
    for g in &netlist.instances {
        // Port kinds never appear as instances of a valid netlist.
        let kw = g.kind.keyword().unwrap_or("buf");
        let mut pins = vec![g.output.as_str()];
        pins.extend(g.inputs.iter().map(String::as_str));
        writeln!(s, "  {kw} {} ({});", g.id, pins.join(", ")).unwrap();
    }
    s.push_str("endmodule\n");
    Ok(s)
}
