//! Message- and trace-level event-equivalence, parameterized by a single
//! event, a clause, or a clause plus output event.
//!
//! A message is irrelevant to a relation when its port is named by none of
//! the relation's events; irrelevant messages can be freely deleted when
//! comparing traces. Relevant messages must pair up in order, equal per
//! port, and equal per value wherever a VALUE event watches the port.

use std::collections::HashMap;

use crate::component::{Message, Trace};
use crate::formula::{EventKind, EventRef, NegClause};

/// Which events induce the equivalence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    ByEvent(EventRef),
    ByClause(NegClause),
    /// Clause plus the checked CFT's output event. The event is expected to
    /// sit on an output port of the subject component; the checker enforces
    /// this where it matters.
    ByClauseAndEvent(NegClause, EventRef),
}

impl Relation {
    pub fn events(&self) -> Vec<&EventRef> {
        match self {
            Relation::ByEvent(e) => vec![e],
            Relation::ByClause(c) => c.events().collect(),
            Relation::ByClauseAndEvent(c, e) => {
                let mut v: Vec<&EventRef> = c.events().collect();
                v.push(e);
                v
            }
        }
    }

    /// The clause part, if any.
    pub fn clause(&self) -> Option<&NegClause> {
        match self {
            Relation::ByEvent(_) => None,
            Relation::ByClause(c) | Relation::ByClauseAndEvent(c, _) => Some(c),
        }
    }
}

/// True iff no event of the relation names the message's port.
pub fn msg_irrelevant(m: &Message, rel: &Relation) -> bool {
    match rel {
        Relation::ByEvent(e) => e.port != m.port,
        Relation::ByClause(c) => c.events().all(|e| e.port != m.port),
        Relation::ByClauseAndEvent(c, e) => {
            e.port != m.port && c.events().all(|e| e.port != m.port)
        }
    }
}

/// Per-event equivalence lifted over the relation's events; `None` stands for
/// the irrelevance marker.
pub fn msg_equiv(m1: Option<&Message>, m2: Option<&Message>, rel: &Relation) -> bool {
    match rel {
        Relation::ByEvent(e) => msg_equiv_single(m1, m2, e),
        Relation::ByClause(c) => c.events().all(|e| msg_equiv_single(m1, m2, e)),
        Relation::ByClauseAndEvent(c, e) => {
            msg_equiv_single(m1, m2, e) && c.events().all(|e| msg_equiv_single(m1, m2, e))
        }
    }
}

fn msg_equiv_single(m1: Option<&Message>, m2: Option<&Message>, event: &EventRef) -> bool {
    let irr = |m: Option<&Message>| m.is_none_or(|m| m.port != event.port);
    if irr(m1) && irr(m2) {
        return true;
    }
    let (Some(m1), Some(m2)) = (m1, m2) else {
        return false;
    };
    m1.port == event.port
        && m2.port == event.port
        && (event.kind == EventKind::Exists || m1.value == m2.value)
}

/// Removes every message irrelevant under the relation, preserving order.
pub fn filter_relevant(t: &Trace, rel: &Relation) -> Trace {
    Trace(t.iter().filter(|m| !msg_irrelevant(m, rel)).cloned().collect())
}

/// The recursive trace relation: empty traces are equivalent, irrelevant
/// heads may be dropped on either side, and relevant heads must be
/// message-equivalent with equivalent tails.
///
/// Memoized over suffix index pairs so the case order never matters.
pub fn trace_equiv(t1: &Trace, t2: &Trace, rel: &Relation) -> bool {
    let mut memo: HashMap<(usize, usize), bool> = HashMap::new();
    trace_equiv_at(t1, t2, rel, 0, 0, &mut memo)
}

fn trace_equiv_at(
    t1: &Trace,
    t2: &Trace,
    rel: &Relation,
    i: usize,
    j: usize,
    memo: &mut HashMap<(usize, usize), bool>,
) -> bool {
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let m1 = t1.0.get(i);
    let m2 = t2.0.get(j);
    let result = match (m1, m2) {
        (None, None) => true,
        (Some(m1), None) => {
            msg_irrelevant(m1, rel) && trace_equiv_at(t1, t2, rel, i + 1, j, memo)
        }
        (None, Some(m2)) => {
            msg_irrelevant(m2, rel) && trace_equiv_at(t1, t2, rel, i, j + 1, memo)
        }
        (Some(m1), Some(m2)) => {
            (msg_irrelevant(m1, rel) && trace_equiv_at(t1, t2, rel, i + 1, j, memo))
                || (msg_irrelevant(m2, rel) && trace_equiv_at(t1, t2, rel, i, j + 1, memo))
                || (msg_equiv(Some(m1), Some(m2), rel)
                    && trace_equiv_at(t1, t2, rel, i + 1, j + 1, memo))
        }
    };
    memo.insert((i, j), result);
    result
}

/// Canonical image of a relevant message: the port, plus the value when any
/// VALUE event of the relation watches the port. Two relevant messages are
/// equivalent iff their keys are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct MsgKey {
    pub port: String,
    pub value: Option<String>,
}

impl Relation {
    /// `None` for irrelevant messages, the canonical key otherwise.
    pub(crate) fn msg_key(&self, m: &Message) -> Option<MsgKey> {
        if msg_irrelevant(m, self) {
            return None;
        }
        let watches_value = |e: &EventRef| e.port == m.port && e.kind == EventKind::Value;
        let value_watched = match self {
            Relation::ByEvent(e) => watches_value(e),
            Relation::ByClause(c) => c.events().any(watches_value),
            Relation::ByClauseAndEvent(c, e) => {
                watches_value(e) || c.events().any(watches_value)
            }
        };
        Some(MsgKey {
            port: m.port.clone(),
            value: value_watched.then(|| m.value.clone()),
        })
    }

    /// Canonical image of a trace: keys of its relevant messages in order.
    /// Traces are equivalent iff their canonical images are equal.
    pub(crate) fn canon_trace(&self, t: &Trace) -> Vec<MsgKey> {
        t.iter().filter_map(|m| self.msg_key(m)).collect()
    }
}
