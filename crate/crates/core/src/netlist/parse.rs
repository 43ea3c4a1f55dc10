// SPDX-License-Identifier: Apache-2.0

//! Tokenizer and recursive-descent parser for the netlist subset.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{GateInstance, GateKind, ModuleInstance, Netlist, NetlistError, Port};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

impl Token {
    fn text(&self) -> String {
        match &self.tok {
            Tok::Ident(s) => s.clone(),
            Tok::Sym(c) => c.to_string(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '/'
}

fn tokenize(text: &str, file: &str) -> Result<Vec<Token>, NetlistError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '/' => {
                chars.next();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                    }
                } else {
                    return Err(syntax(file, line, "/", "only `//` comments are supported"));
                }
            }
            '(' | ')' | ',' | ';' | '.' => {
                out.push(Token {
                    tok: Tok::Sym(c),
                    line,
                });
                chars.next();
            }
            '[' | ']' | ':' => {
                return Err(syntax(
                    file,
                    line,
                    &c.to_string(),
                    "vectors and buses are not supported; bit-blast the netlist first",
                ));
            }
            c if is_ident_start(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(Token {
                    tok: Tok::Ident(s),
                    line,
                });
            }
            other => {
                return Err(syntax(
                    file,
                    line,
                    &other.to_string(),
                    "unexpected character",
                ))
            }
        }
    }
    Ok(out)
}

fn syntax(file: &str, line: usize, token: &str, message: &str) -> NetlistError {
    NetlistError::Syntax {
        file: file.to_string(),
        line,
        token: token.to_string(),
        message: message.to_string(),
    }
}

const RESERVED: [&str; 5] = ["module", "endmodule", "input", "output", "wire"];

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn last_line(&self) -> usize {
        self.toks.last().map_or(1, |t| t.line)
    }

    fn err_here(&self, message: &str) -> NetlistError {
        match self.peek() {
            Some(t) => syntax(self.file, t.line, &t.text(), message),
            None => syntax(self.file, self.last_line(), "<eof>", message),
        }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<usize, NetlistError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Sym(s),
                line,
            }) if *s == c => {
                let line = *line;
                self.pos += 1;
                Ok(line)
            }
            _ => Err(self.err_here(&format!("expected `{c}`"))),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn peek_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c)
    }

    /// An identifier that is not a reserved word.
    fn name(&mut self) -> Result<(String, usize), NetlistError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s),
                line,
            }) if !RESERVED.contains(&s.as_str()) => {
                let out = (s.clone(), *line);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.err_here("expected identifier")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<usize, NetlistError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s),
                line,
            }) if s == kw => {
                let line = *line;
                self.pos += 1;
                Ok(line)
            }
            _ => Err(self.err_here(&format!("expected `{kw}`"))),
        }
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => Some(s.as_str()),
            _ => None,
        }
    }

    fn module(&mut self) -> Result<(Netlist, Vec<String>), NetlistError> {
        self.keyword("module")?;
        let (name, _) = self.name()?;
        let mut header = Vec::new();
        if self.eat_sym('(') {
            if !self.peek_sym(')') {
                loop {
                    header.push(self.name()?.0);
                    if !self.eat_sym(',') {
                        break;
                    }
                }
            }
            self.expect_sym(')')?;
        }
        self.expect_sym(';')?;

        let mut m = Netlist::new(name);
        let mut ids = HashSet::new();
        loop {
            let Some(word) = self.peek_ident().map(str::to_string) else {
                return Err(self.err_here("expected declaration, instance or `endmodule`"));
            };
            match word.as_str() {
                "endmodule" => {
                    self.pos += 1;
                    break;
                }
                "input" | "output" | "wire" => self.declaration(&mut m)?,
                "module" => return Err(self.err_here("nested module definitions are not allowed")),
                _ => {
                    if let Some(kind) = GateKind::from_keyword(&word) {
                        self.pos += 1;
                        let g = self.gate(kind)?;
                        if !ids.insert(g.id.clone()) {
                            return Err(NetlistError::DuplicateId(g.id));
                        }
                        m.instances.push(g);
                    } else {
                        let s = self.subinstance()?;
                        if !ids.insert(s.id.clone()) {
                            return Err(NetlistError::DuplicateId(s.id));
                        }
                        m.submodules.push(s);
                    }
                }
            }
        }
        for p in &header {
            if !m.is_input(p) && !m.is_output(p) {
                return Err(NetlistError::UndeclaredNet(p.clone()));
            }
        }
        Ok((m, header))
    }

    fn declaration(&mut self, m: &mut Netlist) -> Result<(), NetlistError> {
        let Some(tok) = self.next() else {
            return Err(self.err_here("expected declaration"));
        };
        let word = tok.text();
        loop {
            let (net, line) = self.name()?;
            if !m.nets.insert(net.clone()) {
                return Err(syntax(self.file, line, &net, "net declared twice"));
            }
            match word.as_str() {
                "input" => m.input_ports.push(Port::new(net, line)),
                "output" => m.output_ports.push(Port::new(net, line)),
                _ => {}
            }
            if !self.eat_sym(',') {
                break;
            }
        }
        self.expect_sym(';')?;
        Ok(())
    }

    fn gate(&mut self, kind: GateKind) -> Result<GateInstance, NetlistError> {
        let (id, line) = self.name()?;
        self.expect_sym('(')?;
        let mut nets = vec![self.name()?.0];
        while self.eat_sym(',') {
            nets.push(self.name()?.0);
        }
        self.expect_sym(')')?;
        self.expect_sym(';')?;
        let output = nets.remove(0);
        Ok(GateInstance {
            id,
            kind,
            inputs: nets,
            output,
            source_line: line,
        })
    }

    fn subinstance(&mut self) -> Result<ModuleInstance, NetlistError> {
        let (module, line) = self.name()?;
        let (id, _) = self.name()?;
        self.expect_sym('(')?;
        let mut connections = Vec::new();
        loop {
            if !self.peek_sym('.') {
                return Err(self.err_here("expected named port connection `.port(net)`"));
            }
            self.expect_sym('.')?;
            let (port, _) = self.name()?;
            self.expect_sym('(')?;
            let (net, _) = self.name()?;
            self.expect_sym(')')?;
            connections.push((port, net));
            if !self.eat_sym(',') {
                break;
            }
        }
        self.expect_sym(')')?;
        self.expect_sym(';')?;
        Ok(ModuleInstance {
            id,
            module,
            connections,
            source_line: line,
        })
    }
}

/// Parses one or more module definitions.
///
/// The top module is the one no other module instantiates (the last such
/// module when several qualify); every other definition lands in its
/// `hierarchy` map.
pub fn parse_netlist(text: &str, filename: &str) -> Result<Netlist, NetlistError> {
    let toks = tokenize(text, filename)?;
    let mut p = Parser {
        toks,
        pos: 0,
        file: filename,
    };
    let mut modules: Vec<Netlist> = Vec::new();
    while p.peek().is_some() {
        let (m, _) = p.module()?;
        if modules.iter().any(|o| o.name == m.name) {
            return Err(syntax(filename, p.last_line(), &m.name, "module defined twice"));
        }
        modules.push(m);
    }
    if modules.is_empty() {
        return Err(syntax(filename, 1, "<eof>", "no module found"));
    }

    let defs: HashMap<&str, &Netlist> = modules.iter().map(|m| (m.name.as_str(), m)).collect();
    for m in &modules {
        check_module(m, &defs)?;
    }

    let instantiated: HashSet<&str> = modules
        .iter()
        .flat_map(|m| m.submodules.iter().map(|s| s.module.as_str()))
        .collect();
    let top_idx = modules
        .iter()
        .rposition(|m| !instantiated.contains(m.name.as_str()))
        .unwrap_or(modules.len() - 1);
    let mut top = modules.remove(top_idx);
    let hierarchy: BTreeMap<String, Netlist> =
        modules.into_iter().map(|m| (m.name.clone(), m)).collect();
    top.hierarchy = hierarchy;
    Ok(top)
}

/// Declaration, arity and single-driver checks for one module body.
fn check_module(m: &Netlist, defs: &HashMap<&str, &Netlist>) -> Result<(), NetlistError> {
    let declared = |n: &str| -> Result<(), NetlistError> {
        if m.nets.contains(n) {
            Ok(())
        } else {
            Err(NetlistError::UndeclaredNet(n.to_string()))
        }
    };
    let mut driven: BTreeSet<&str> = m.input_ports.iter().map(|p| p.name.as_str()).collect();
    for g in &m.instances {
        declared(&g.output)?;
        for i in &g.inputs {
            declared(i)?;
        }
        if g.kind.is_port() || !g.kind.arity().accepts(g.inputs.len()) {
            return Err(NetlistError::Arity(g.id.clone()));
        }
        if !driven.insert(&g.output) {
            return Err(NetlistError::MultipleDriver(g.output.clone()));
        }
    }
    for s in &m.submodules {
        let child = defs.get(s.module.as_str());
        for (port, net) in &s.connections {
            declared(net)?;
            if let Some(child) = child {
                if child.is_output(port) {
                    if !driven.insert(net) {
                        return Err(NetlistError::MultipleDriver(net.clone()));
                    }
                } else if !child.is_input(port) {
                    return Err(NetlistError::UnknownPort {
                        module: s.module.clone(),
                        port: port.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}
