//! Parser and serializer for the line-oriented model format.
//!
//! ```text
//! component <name> { in|out <port> : {v1,v2,...} ; init <state> ;
//!                    <state> -- <port>?<v> --> <state> ; ... }
//! cft <name> on <component> { output <port>.<kind> ; formula <text> ; }
//! system <name> { use <c> <d> ; connect <d>.<port> -> <c>.<port> ;
//!                 bind <event> := <cftname> ; check <cftname> ; }
//! ```
//!
//! `#` starts a comment running to the end of the line.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::cft::{Binding, Cft};
use crate::component::{Component, Direction, Message, PortDecl};
use crate::formula::{EventKind, EventRef, Formula};
use crate::harness::{BoundsSpec, SystemSpec};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ModelError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// A parsed model file: fully validated components, fault trees, and system
/// declarations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Model {
    pub components: BTreeMap<String, Component>,
    pub cfts: BTreeMap<String, Cft>,
    pub systems: BTreeMap<String, SystemDecl>,
}

/// A `system` block: two components, their connections, the event bindings,
/// and the consumer-side tree to check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDecl {
    pub c: String,
    pub d: String,
    pub connections: Vec<String>,
    pub binds: Vec<(EventRef, String)>,
    pub check: String,
}

impl Model {
    /// Assembles the checkable system: components, consumer tree, and
    /// bindings, with the given bounds.
    pub fn system_spec(&self, name: &str, bounds: BoundsSpec) -> Result<SystemSpec, ModelError> {
        let fail = |message: String| ModelError { line: 0, col: 0, message };
        let decl = self
            .systems
            .get(name)
            .ok_or_else(|| fail(format!("unknown system '{name}'")))?;
        let c = self.components[&decl.c].clone();
        let d = self.components[&decl.d].clone();
        let cft_c = self.cfts[&decl.check].clone();
        let binding = Binding::new(
            decl.binds
                .iter()
                .map(|(event, cft_name)| (event.clone(), self.cfts[cft_name].clone())),
        )
        .map_err(|e| fail(e.to_string()))?;
        SystemSpec::new(c, d, decl.connections.clone(), cft_c, binding, bounds)
            .map_err(|e| fail(e.to_string()))
    }

    /// Canonical text form; parsing it back yields an identical model.
    ///
    /// States are implicit in the format (the initial state plus transition
    /// endpoints), so a component constructed programmatically with declared
    /// but unreferenced states normalizes: those states are not
    /// representable and disappear. Parsed models always round-trip exactly.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, comp) in &self.components {
            writeln!(f, "component {name} {{")?;
            for p in comp.ports() {
                let dir = match p.direction {
                    Direction::In => "in",
                    Direction::Out => "out",
                };
                writeln!(f, "  {dir} {} : {{{}}} ;", p.name, p.domain.join(","))?;
            }
            writeln!(f, "  init {} ;", comp.initial())?;
            for (from, m, to) in comp.transitions() {
                writeln!(f, "  {from} -- {m} --> {to} ;")?;
            }
            writeln!(f, "}}")?;
        }
        for (name, cft) in &self.cfts {
            writeln!(f, "cft {name} on {} {{", cft.owner)?;
            writeln!(f, "  output {} ;", cft.output_event)?;
            writeln!(f, "  formula {} ;", cft.formula)?;
            writeln!(f, "}}")?;
        }
        for (name, sys) in &self.systems {
            writeln!(f, "system {name} {{")?;
            writeln!(f, "  use {} {} ;", sys.c, sys.d)?;
            for port in &sys.connections {
                writeln!(f, "  connect {}.{port} -> {}.{port} ;", sys.d, sys.c)?;
            }
            for (event, cft_name) in &sys.binds {
                writeln!(f, "  bind {event} := {cft_name} ;")?;
            }
            writeln!(f, "  check {} ;", sys.check)?;
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}

pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut model = Model::default();
    while !parser.at_end() {
        let keyword = parser.expect_ident("'component', 'cft', or 'system'")?;
        match keyword.text.as_str() {
            "component" => parser.component_block(&mut model)?,
            "cft" => parser.cft_block(&mut model)?,
            "system" => parser.system_block(&mut model)?,
            other => {
                return Err(parser.err_at(
                    &keyword,
                    format!("expected 'component', 'cft', or 'system', found '{other}'"),
                ))
            }
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Ident,
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    text: String,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ModelError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphanumeric() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
                col += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident,
                text: text[start..i].to_string(),
                line,
                col: start_col,
            });
            continue;
        }
        let multi: &[&str] = &["-->", "--", "->", ":="];
        let rest = &text[i..];
        if let Some(op) = multi.iter().find(|op| rest.starts_with(**op)) {
            tokens.push(Token {
                kind: TokenKind::Punct(op),
                text: op.to_string(),
                line,
                col: start_col,
            });
            i += op.len();
            col += op.len();
            continue;
        }
        let single: &[(u8, &str)] = &[
            (b'{', "{"),
            (b'}', "}"),
            (b';', ";"),
            (b':', ":"),
            (b',', ","),
            (b'.', "."),
            (b'?', "?"),
            (b'!', "!"),
            (b'(', "("),
            (b')', ")"),
            (b'&', "&"),
            (b'|', "|"),
        ];
        if let Some((_, op)) = single.iter().find(|(b, _)| *b == c) {
            tokens.push(Token {
                kind: TokenKind::Punct(op),
                text: (*op).to_string(),
                line,
                col: start_col,
            });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ModelError {
            line,
            col,
            message: format!("unexpected character '{}'", c as char),
        });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn err_here(&self, message: impl Into<String>) -> ModelError {
        match self.tokens.get(self.pos).or_else(|| self.tokens.last()) {
            Some(t) => ModelError { line: t.line, col: t.col, message: message.into() },
            None => ModelError { line: 1, col: 1, message: message.into() },
        }
    }

    fn err_at(&self, token: &Token, message: impl Into<String>) -> ModelError {
        ModelError { line: token.line, col: token.col, message: message.into() }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<Token, ModelError> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err_here(format!("expected {expected}, found end of input")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_ident(&mut self, what: &str) -> Result<Token, ModelError> {
        let t = self.next(what)?;
        if t.kind != TokenKind::Ident {
            return Err(self.err_at(&t, format!("expected {what}, found '{}'", t.text)));
        }
        Ok(t)
    }

    fn expect_punct(&mut self, op: &str) -> Result<Token, ModelError> {
        let t = self.next(&format!("'{op}'"))?;
        if t.kind != TokenKind::Punct(match_op(op)) {
            return Err(self.err_at(&t, format!("expected '{op}', found '{}'", t.text)));
        }
        Ok(t)
    }

    fn peek_punct(&self, op: &str) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Punct(match_op(op)))
    }

    fn event_ref(&mut self) -> Result<EventRef, ModelError> {
        let port = self.expect_ident("port name")?;
        self.expect_punct(".")?;
        let kind = self.expect_ident("'exists' or 'value'")?;
        let kind = match kind.text.as_str() {
            "exists" => EventKind::Exists,
            "value" => EventKind::Value,
            other => {
                return Err(
                    self.err_at(&kind, format!("expected 'exists' or 'value', found '{other}'"))
                )
            }
        };
        Ok(EventRef { port: port.text, kind })
    }

    fn formula(&mut self) -> Result<Formula, ModelError> {
        let mut children = vec![self.formula_and()?];
        while self.peek_punct("|") {
            self.pos += 1;
            children.push(self.formula_and()?);
        }
        Ok(if children.len() == 1 { children.pop().unwrap() } else { Formula::Or(children) })
    }

    fn formula_and(&mut self) -> Result<Formula, ModelError> {
        let mut children = vec![self.formula_atom()?];
        while self.peek_punct("&") {
            self.pos += 1;
            children.push(self.formula_atom()?);
        }
        Ok(if children.len() == 1 { children.pop().unwrap() } else { Formula::And(children) })
    }

    fn formula_atom(&mut self) -> Result<Formula, ModelError> {
        if self.peek_punct("(") {
            self.pos += 1;
            let inner = self.formula()?;
            self.expect_punct(")")?;
            Ok(inner)
        } else {
            Ok(Formula::Literal(self.event_ref()?))
        }
    }

    fn component_block(&mut self, model: &mut Model) -> Result<(), ModelError> {
        let name = self.expect_ident("component name")?;
        if model.components.contains_key(&name.text) {
            return Err(self.err_at(&name, format!("duplicate component name '{}'", name.text)));
        }
        self.expect_punct("{")?;
        let mut ports: Vec<PortDecl> = Vec::new();
        let mut initial: Option<String> = None;
        let mut transitions: Vec<(String, Message, String)> = Vec::new();
        let mut states: Vec<String> = Vec::new();
        while !self.peek_punct("}") {
            let word = self.expect_ident("'in', 'out', 'init', or a state name")?;
            match word.text.as_str() {
                "in" | "out" => {
                    let direction =
                        if word.text == "in" { Direction::In } else { Direction::Out };
                    let port = self.expect_ident("port name")?;
                    self.expect_punct(":")?;
                    self.expect_punct("{")?;
                    let mut domain = vec![self.expect_ident("domain value")?.text];
                    while self.peek_punct(",") {
                        self.pos += 1;
                        domain.push(self.expect_ident("domain value")?.text);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct(";")?;
                    ports.push(PortDecl { name: port.text, direction, domain });
                }
                "init" => {
                    let state = self.expect_ident("state name")?;
                    if initial.is_some() {
                        return Err(self.err_at(&state, "duplicate init declaration".to_string()));
                    }
                    states.push(state.text.clone());
                    initial = Some(state.text);
                    self.expect_punct(";")?;
                }
                _ => {
                    // <state> -- <port>?<v> --> <state> ;
                    let from = word;
                    self.expect_punct("--")?;
                    let port = self.expect_ident("port name")?;
                    let send = self.next("'?' or '!'")?;
                    let direction = match send.kind {
                        TokenKind::Punct("?") => Direction::In,
                        TokenKind::Punct("!") => Direction::Out,
                        _ => {
                            return Err(
                                self.err_at(&send, format!("expected '?' or '!', found '{}'", send.text))
                            )
                        }
                    };
                    let value = self.expect_ident("value")?;
                    self.expect_punct("-->")?;
                    let to = self.expect_ident("state name")?;
                    self.expect_punct(";")?;
                    let decl = ports.iter().find(|p| p.name == port.text).ok_or_else(|| {
                        self.err_at(&port, format!("undeclared port '{}'", port.text))
                    })?;
                    if decl.direction != direction {
                        return Err(self.err_at(
                            &port,
                            format!("port '{}' is declared {}", port.text, decl.direction),
                        ));
                    }
                    if !decl.domain.contains(&value.text) {
                        return Err(self.err_at(
                            &value,
                            format!("value '{}' is not in the domain of '{}'", value.text, port.text),
                        ));
                    }
                    states.push(from.text.clone());
                    states.push(to.text.clone());
                    transitions.push((
                        from.text,
                        Message { port: port.text, value: value.text, direction },
                        to.text,
                    ));
                }
            }
        }
        self.expect_punct("}")?;
        let initial = initial
            .ok_or_else(|| self.err_at(&name, format!("component '{}' has no init", name.text)))?;
        let component = Component::new(name.text.clone(), ports, states, initial, transitions)
            .map_err(|e| self.err_at(&name, e.to_string()))?;
        model.components.insert(name.text, component);
        Ok(())
    }

    fn cft_block(&mut self, model: &mut Model) -> Result<(), ModelError> {
        let name = self.expect_ident("cft name")?;
        if model.cfts.contains_key(&name.text) {
            return Err(self.err_at(&name, format!("duplicate cft name '{}'", name.text)));
        }
        let on = self.expect_ident("'on'")?;
        if on.text != "on" {
            return Err(self.err_at(&on, format!("expected 'on', found '{}'", on.text)));
        }
        let owner = self.expect_ident("component name")?;
        let component = model.components.get(&owner.text).ok_or_else(|| {
            self.err_at(&owner, format!("unknown component '{}'", owner.text))
        })?;
        self.expect_punct("{")?;
        let mut output: Option<EventRef> = None;
        let mut formula: Option<Formula> = None;
        while !self.peek_punct("}") {
            let word = self.expect_ident("'output' or 'formula'")?;
            match word.text.as_str() {
                "output" => {
                    output = Some(self.event_ref()?);
                    self.expect_punct(";")?;
                }
                "formula" => {
                    formula = Some(self.formula()?);
                    self.expect_punct(";")?;
                }
                other => {
                    return Err(self
                        .err_at(&word, format!("expected 'output' or 'formula', found '{other}'")))
                }
            }
        }
        self.expect_punct("}")?;
        let output = output
            .ok_or_else(|| self.err_at(&name, "cft block is missing 'output'".to_string()))?;
        let formula = formula
            .ok_or_else(|| self.err_at(&name, "cft block is missing 'formula'".to_string()))?;
        let cft = Cft::new(formula, output, component)
            .map_err(|e| self.err_at(&name, e.to_string()))?;
        model.cfts.insert(name.text, cft);
        Ok(())
    }

    fn system_block(&mut self, model: &mut Model) -> Result<(), ModelError> {
        let name = self.expect_ident("system name")?;
        if model.systems.contains_key(&name.text) {
            return Err(self.err_at(&name, format!("duplicate system name '{}'", name.text)));
        }
        self.expect_punct("{")?;
        let mut used: Option<(String, String)> = None;
        let mut connections: Vec<String> = Vec::new();
        let mut binds: Vec<(EventRef, String)> = Vec::new();
        let mut check: Option<String> = None;
        while !self.peek_punct("}") {
            let word = self.expect_ident("'use', 'connect', 'bind', or 'check'")?;
            match word.text.as_str() {
                "use" => {
                    let c = self.expect_ident("component name")?;
                    let d = self.expect_ident("component name")?;
                    for t in [&c, &d] {
                        if !model.components.contains_key(&t.text) {
                            return Err(
                                self.err_at(t, format!("unknown component '{}'", t.text))
                            );
                        }
                    }
                    used = Some((c.text, d.text));
                    self.expect_punct(";")?;
                }
                "connect" => {
                    let (c, d) = used.clone().ok_or_else(|| {
                        self.err_at(&word, "connect before use".to_string())
                    })?;
                    let d_side = self.expect_ident("component name")?;
                    self.expect_punct(".")?;
                    let d_port = self.expect_ident("port name")?;
                    self.expect_punct("->")?;
                    let c_side = self.expect_ident("component name")?;
                    self.expect_punct(".")?;
                    let c_port = self.expect_ident("port name")?;
                    self.expect_punct(";")?;
                    if d_side.text != d {
                        return Err(self.err_at(
                            &d_side,
                            format!("connection source must be '{d}', found '{}'", d_side.text),
                        ));
                    }
                    if c_side.text != c {
                        return Err(self.err_at(
                            &c_side,
                            format!("connection target must be '{c}', found '{}'", c_side.text),
                        ));
                    }
                    if d_port.text != c_port.text {
                        return Err(self.err_at(
                            &c_port,
                            format!(
                                "connected ports must share a name, found '{}' -> '{}'",
                                d_port.text, c_port.text
                            ),
                        ));
                    }
                    connections.push(d_port.text);
                }
                "bind" => {
                    let event = self.event_ref()?;
                    self.expect_punct(":=")?;
                    let cft_name = self.expect_ident("cft name")?;
                    if !model.cfts.contains_key(&cft_name.text) {
                        return Err(
                            self.err_at(&cft_name, format!("unknown cft '{}'", cft_name.text))
                        );
                    }
                    self.expect_punct(";")?;
                    binds.push((event, cft_name.text));
                }
                "check" => {
                    let cft_name = self.expect_ident("cft name")?;
                    if !model.cfts.contains_key(&cft_name.text) {
                        return Err(
                            self.err_at(&cft_name, format!("unknown cft '{}'", cft_name.text))
                        );
                    }
                    self.expect_punct(";")?;
                    check = Some(cft_name.text);
                }
                other => {
                    return Err(self.err_at(
                        &word,
                        format!("expected 'use', 'connect', 'bind', or 'check', found '{other}'"),
                    ))
                }
            }
        }
        self.expect_punct("}")?;
        let (c, d) =
            used.ok_or_else(|| self.err_at(&name, "system block is missing 'use'".to_string()))?;
        let check = check
            .ok_or_else(|| self.err_at(&name, "system block is missing 'check'".to_string()))?;

        // cross checks: directions, bind targets, check owner
        let c_comp = &model.components[&c];
        let d_comp = &model.components[&d];
        for port in &connections {
            let ok = c_comp.port(port).map(|p| p.direction) == Some(Direction::In)
                && d_comp.port(port).map(|p| p.direction) == Some(Direction::Out);
            if !ok {
                return Err(self.err_at(
                    &name,
                    format!("connection '{port}' must be an input of '{c}' and an output of '{d}'"),
                ));
            }
        }
        for (event, cft_name) in &binds {
            if !connections.contains(&event.port) {
                return Err(self.err_at(
                    &name,
                    format!("bound event {event} is not on a connected port"),
                ));
            }
            let cft = &model.cfts[cft_name];
            if cft.owner != d {
                return Err(self.err_at(
                    &name,
                    format!("bound cft '{cft_name}' is on '{}', expected '{d}'", cft.owner),
                ));
            }
            if &cft.output_event != event {
                return Err(self.err_at(
                    &name,
                    format!(
                        "bound cft '{cft_name}' has output {}, expected {event}",
                        cft.output_event
                    ),
                ));
            }
        }
        if model.cfts[&check].owner != c {
            return Err(self.err_at(
                &name,
                format!("checked cft '{check}' is on '{}', expected '{c}'", model.cfts[&check].owner),
            ));
        }
        model
            .systems
            .insert(name.text, SystemDecl { c, d, connections, binds, check });
        Ok(())
    }
}

fn match_op(op: &str) -> &'static str {
    match op {
        "{" => "{",
        "}" => "}",
        ";" => ";",
        ":" => ":",
        "," => ",",
        "." => ".",
        "?" => "?",
        "!" => "!",
        "(" => "(",
        ")" => ")",
        "&" => "&",
        "|" => "|",
        "--" => "--",
        "-->" => "-->",
        "->" => "->",
        ":=" => ":=",
        other => panic!("unknown operator '{other}'"),
    }
}
