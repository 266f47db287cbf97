//! Propositional formulas over port events, negated-DNF clause extraction,
//! and event substitution.
//!
//! A fault-tree formula contains only non-negated literals combined with `&`
//! and `|`. Negation enters the picture only when the whole formula is
//! negated for analysis: the negation is represented as a disjunction of
//! [`NegClause`]s (conjunctions of negated events), never as a formula node.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// What an event observes on its port: that any message occurred, or the
/// communicated value as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Exists,
    Value,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Exists => write!(f, "exists"),
            EventKind::Value => write!(f, "value"),
        }
    }
}

/// A (port, kind) pair naming one observable event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRef {
    pub port: String,
    pub kind: EventKind,
}

impl EventRef {
    pub fn exists(port: impl Into<String>) -> Self {
        EventRef { port: port.into(), kind: EventKind::Exists }
    }

    pub fn value(port: impl Into<String>) -> Self {
        EventRef { port: port.into(), kind: EventKind::Value }
    }
}

impl fmt::Display for EventRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.port, self.kind)
    }
}

/// A propositional formula whose literals are all non-negated events.
///
/// `And`/`Or` nodes always have at least two children. Constant formulas
/// (zero literals) are not representable and are rejected by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Literal(EventRef),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

/// A conjunction of negated events: the clause unit of correctness checking.
///
/// The stored events are interpreted negated, so `{a, b}` denotes `!a & !b`.
/// Always non-empty; events are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NegClause {
    events: BTreeSet<EventRef>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("unassigned event {0}")]
    UnassignedEvent(EventRef),
    #[error("clause must contain at least one event")]
    EmptyClause,
}

/// Syntax error in formula text, with a byte offset into the input.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("{message} at offset {offset}")]
pub struct FormulaParseError {
    pub offset: usize,
    pub message: String,
}

impl NegClause {
    pub fn new(events: impl IntoIterator<Item = EventRef>) -> Result<Self, FormulaError> {
        let events: BTreeSet<EventRef> = events.into_iter().collect();
        if events.is_empty() {
            return Err(FormulaError::EmptyClause);
        }
        Ok(NegClause { events })
    }

    pub fn events(&self) -> impl Iterator<Item = &EventRef> {
        self.events.iter()
    }

    pub fn contains(&self, event: &EventRef) -> bool {
        self.events.contains(event)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True if every event of `self` also occurs in `other`.
    pub fn is_subset(&self, other: &NegClause) -> bool {
        self.events.is_subset(&other.events)
    }

    /// Clause containing the events of both clauses.
    pub fn union(&self, other: &NegClause) -> NegClause {
        NegClause { events: self.events.union(&other.events).cloned().collect() }
    }
}

impl fmt::Display for NegClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for e in &self.events {
            if !first {
                write!(f, "&")?;
            }
            write!(f, "!{e}")?;
            first = false;
        }
        Ok(())
    }
}

impl Formula {
    pub fn literal(event: EventRef) -> Formula {
        Formula::Literal(event)
    }

    /// Conjunction node. Panics if fewer than two children are supplied;
    /// single-child conjunctions are represented by the child itself.
    pub fn and(children: Vec<Formula>) -> Formula {
        assert!(children.len() >= 2, "And node needs at least two children");
        Formula::And(children)
    }

    /// Disjunction node; same arity rule as [`Formula::and`].
    pub fn or(children: Vec<Formula>) -> Formula {
        assert!(children.len() >= 2, "Or node needs at least two children");
        Formula::Or(children)
    }

    /// All events mentioned by the formula.
    pub fn events(&self) -> BTreeSet<EventRef> {
        let mut out = BTreeSet::new();
        self.collect_events(&mut out);
        out
    }

    fn collect_events(&self, out: &mut BTreeSet<EventRef>) {
        match self {
            Formula::Literal(e) => {
                out.insert(e.clone());
            }
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.collect_events(out);
                }
            }
        }
    }

    /// Standard propositional evaluation under a total assignment.
    pub fn eval(&self, assignment: &BTreeMap<EventRef, bool>) -> Result<bool, FormulaError> {
        match self {
            Formula::Literal(e) => assignment
                .get(e)
                .copied()
                .ok_or_else(|| FormulaError::UnassignedEvent(e.clone())),
            Formula::And(cs) => {
                let mut acc = true;
                for c in cs {
                    acc &= c.eval(assignment)?;
                }
                Ok(acc)
            }
            Formula::Or(cs) => {
                let mut acc = false;
                for c in cs {
                    acc |= c.eval(assignment)?;
                }
                Ok(acc)
            }
        }
    }

    /// Disjunctive normal form of the negated formula.
    ///
    /// The returned clauses satisfy `!self == C_1 | ... | C_n` under the
    /// truth-table semantics. The list is canonical: events sorted within
    /// each clause, clauses sorted, duplicates removed, and any clause that
    /// is a proper superset of another removed (in all-negated conjunctions
    /// the superset clause is implied by its subset clause, so the disjunction
    /// is unchanged).
    pub fn neg_dnf(&self) -> Vec<NegClause> {
        canonicalize_clauses(self.neg_dnf_raw())
    }

    fn neg_dnf_raw(&self) -> Vec<BTreeSet<EventRef>> {
        match self {
            // !e is the singleton clause {e}
            Formula::Literal(e) => vec![BTreeSet::from([e.clone()])],
            // !(x & y) == !x | !y: union of the clause lists
            Formula::And(cs) => cs.iter().flat_map(|c| c.neg_dnf_raw()).collect(),
            // !(x | y) == !x & !y: distribute into clause products
            Formula::Or(cs) => {
                let mut acc: Vec<BTreeSet<EventRef>> = vec![BTreeSet::new()];
                for c in cs {
                    let child = c.neg_dnf_raw();
                    let mut next = Vec::with_capacity(acc.len() * child.len());
                    for base in &acc {
                        for cl in &child {
                            let mut merged = base.clone();
                            merged.extend(cl.iter().cloned());
                            next.push(merged);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }

    /// Replaces every literal equal to `target` by a copy of `replacement`.
    pub fn substitute(&self, target: &EventRef, replacement: &Formula) -> Formula {
        self.map_literals(&|e| {
            if e == target {
                replacement.clone()
            } else {
                Formula::Literal(e.clone())
            }
        })
    }

    /// Replaces every literal equal to `target` by `target & replacement`,
    /// keeping the substituted event in the formula.
    pub fn substitute_strict(&self, target: &EventRef, replacement: &Formula) -> Formula {
        self.map_literals(&|e| {
            if e == target {
                Formula::And(vec![Formula::Literal(e.clone()), replacement.clone()])
            } else {
                Formula::Literal(e.clone())
            }
        })
    }

    fn map_literals(&self, f: &impl Fn(&EventRef) -> Formula) -> Formula {
        match self {
            Formula::Literal(e) => f(e),
            Formula::And(cs) => Formula::And(cs.iter().map(|c| c.map_literals(f)).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(|c| c.map_literals(f)).collect()),
        }
    }

    /// Parses the text syntax: literals `port.exists` / `port.value`,
    /// operators `&` and `|` (with `&` binding tighter), and parentheses.
    pub fn parse(text: &str) -> Result<Formula, FormulaParseError> {
        let mut p = FormulaParser { text, pos: 0 };
        let formula = p.parse_or()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(formula)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Children that would merge into the parent on re-parsing (same
        // operator) or that bind looser (| under &) get parentheses, so the
        // printed text parses back to the identical tree.
        fn write_child(
            f: &mut fmt::Formatter<'_>,
            child: &Formula,
            parent_is_and: bool,
        ) -> fmt::Result {
            let needs_parens = match child {
                Formula::Literal(_) => false,
                Formula::And(_) => parent_is_and,
                Formula::Or(_) => true,
            };
            if needs_parens {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        }

        match self {
            Formula::Literal(e) => write!(f, "{e}"),
            Formula::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write_child(f, c, true)?;
                }
                Ok(())
            }
            Formula::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write_child(f, c, false)?;
                }
                Ok(())
            }
        }
    }
}

/// Sorts, deduplicates, and drops subsumed (superset) clauses.
fn canonicalize_clauses(raw: Vec<BTreeSet<EventRef>>) -> Vec<NegClause> {
    let dedup: BTreeSet<BTreeSet<EventRef>> = raw.into_iter().collect();
    let keep: Vec<BTreeSet<EventRef>> = dedup
        .iter()
        .filter(|cl| !dedup.iter().any(|other| *other != **cl && other.is_subset(cl)))
        .cloned()
        .collect();
    keep.into_iter().map(|events| NegClause { events }).collect()
}

/// Canonicalizes an arbitrary clause family the same way [`Formula::neg_dnf`]
/// canonicalizes its output: dedup plus subsumption pruning.
pub fn canonical_clause_set(clauses: impl IntoIterator<Item = NegClause>) -> Vec<NegClause> {
    canonicalize_clauses(clauses.into_iter().map(|c| c.events).collect())
}

/// True iff the two formulas evaluate identically on every assignment over
/// the union of their event sets.
pub fn formulas_equiv(a: &Formula, b: &Formula) -> bool {
    let events: Vec<EventRef> = a.events().union(&b.events()).cloned().collect();
    for_each_assignment(&events, |assignment| {
        a.eval(assignment).unwrap() == b.eval(assignment).unwrap()
    })
}

/// Evaluates a negated-DNF clause list: `OR_i AND_{e in C_i} !assignment[e]`.
pub fn eval_clauses(
    clauses: &[NegClause],
    assignment: &BTreeMap<EventRef, bool>,
) -> Result<bool, FormulaError> {
    for clause in clauses {
        let mut all = true;
        for e in clause.events() {
            let v = assignment
                .get(e)
                .copied()
                .ok_or_else(|| FormulaError::UnassignedEvent(e.clone()))?;
            all &= !v;
        }
        if all {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Runs `check` on every assignment over `events`; true iff all pass.
pub fn for_each_assignment(
    events: &[EventRef],
    mut check: impl FnMut(&BTreeMap<EventRef, bool>) -> bool,
) -> bool {
    assert!(events.len() < usize::BITS as usize);
    for mask in 0u64..(1u64 << events.len()) {
        let assignment: BTreeMap<EventRef, bool> = events
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), mask & (1 << i) != 0))
            .collect();
        if !check(&assignment) {
            return false;
        }
    }
    true
}

struct FormulaParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> FormulaParser<'a> {
    fn err(&self, message: impl Into<String>) -> FormulaParseError {
        FormulaParseError { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len()
            && self.text.as_bytes()[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.as_bytes().get(self.pos).copied()
    }

    fn parse_or(&mut self) -> Result<Formula, FormulaParseError> {
        let mut children = vec![self.parse_and()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            children.push(self.parse_and()?);
        }
        Ok(if children.len() == 1 { children.pop().unwrap() } else { Formula::Or(children) })
    }

    fn parse_and(&mut self) -> Result<Formula, FormulaParseError> {
        let mut children = vec![self.parse_atom()?];
        while self.peek() == Some(b'&') {
            self.pos += 1;
            children.push(self.parse_atom()?);
        }
        Ok(if children.len() == 1 { children.pop().unwrap() } else { Formula::And(children) })
    }

    fn parse_atom(&mut self) -> Result<Formula, FormulaParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_or()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let port = self.parse_ident()?;
                if self.text.as_bytes().get(self.pos) != Some(&b'.') {
                    return Err(self.err("expected '.' after port name"));
                }
                self.pos += 1;
                let kind_name = self.parse_ident()?;
                let kind = match kind_name.as_str() {
                    "exists" => EventKind::Exists,
                    "value" => EventKind::Value,
                    other => {
                        return Err(self.err(format!(
                            "expected 'exists' or 'value', found '{other}'"
                        )))
                    }
                };
                Ok(Formula::Literal(EventRef { port, kind }))
            }
            _ => Err(self.err("expected literal or '('")),
        }
    }

    fn parse_ident(&mut self) -> Result<String, FormulaParseError> {
        let start = self.pos;
        while self.pos < self.text.len() {
            let c = self.text.as_bytes()[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected identifier"));
        }
        Ok(self.text[start..self.pos].to_string())
    }
}
