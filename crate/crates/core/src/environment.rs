//! Finite environment tables: trace-indexed input offers, validity, the
//! erroneous-environment relation, and bounded enumeration of all valid
//! tables.
//!
//! An environment maps each observed trace to the set of inputs it offers
//! next. Tables are finite: offers are recorded for traces up to a depth
//! bound and are empty beyond it. Checker verdicts are therefore always
//! relative to the declared bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::component::{Message, Trace};
use crate::equivalence::{msg_equiv, msg_irrelevant, MsgKey, Relation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("offered message {0} is not an input")]
    OfferNotInput(Message),
    #[error("offer key {trace} has length {len}, table depth is {depth}")]
    KeyBeyondDepth { trace: Trace, len: usize, depth: usize },
    #[error("bound mismatch: trace bound {bound} exceeds table depth {depth}")]
    BoundMismatch { bound: usize, depth: usize },
    #[error("relation must carry a clause and an output event")]
    NotClauseAndEvent,
}

/// A finite environment: offered input sets keyed by observed traces of
/// length at most `depth`. Traces beyond the depth implicitly map to the
/// empty set; entries with empty offer sets are not stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EnvTable {
    depth: usize,
    offers: BTreeMap<Trace, BTreeSet<Message>>,
}

impl EnvTable {
    pub fn new(
        depth: usize,
        offers: BTreeMap<Trace, BTreeSet<Message>>,
    ) -> Result<Self, EnvError> {
        for (t, set) in &offers {
            if t.len() > depth {
                return Err(EnvError::KeyBeyondDepth {
                    trace: t.clone(),
                    len: t.len(),
                    depth,
                });
            }
            for m in set {
                if !m.is_input() {
                    return Err(EnvError::OfferNotInput(m.clone()));
                }
            }
        }
        let offers = offers.into_iter().filter(|(_, set)| !set.is_empty()).collect();
        Ok(EnvTable { depth, offers })
    }

    pub fn empty(depth: usize) -> Self {
        EnvTable { depth, offers: BTreeMap::new() }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// The offered input set at `t`: the stored set within the depth bound,
    /// empty otherwise.
    pub fn offers(&self, t: &Trace) -> BTreeSet<Message> {
        self.offers_ref(t).cloned().unwrap_or_default()
    }

    /// Allocation-free variant of [`EnvTable::offers`]; `None` means empty.
    pub(crate) fn offers_ref(&self, t: &Trace) -> Option<&BTreeSet<Message>> {
        if t.len() > self.depth {
            return None;
        }
        self.offers.get(t)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Trace, &BTreeSet<Message>)> {
        self.offers.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.offers.is_empty()
    }
}

impl fmt::Display for EnvTable {
    /// One line per (trace, offer-set); traces as dotted message lists
    /// (`-` for the empty trace), sets in canonical order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, set) in &self.offers {
            let items: Vec<String> = set.iter().map(ToString::to_string).collect();
            writeln!(f, "{} {{{}}}", t, items.join(","))?;
        }
        Ok(())
    }
}

/// All traces over the alphabet with length at most `bound`, in canonical
/// order.
pub(crate) fn all_traces(alphabet: &BTreeSet<Message>, bound: usize) -> Vec<Trace> {
    let mut out = vec![Trace::empty()];
    let mut frontier = vec![Trace::empty()];
    for _ in 0..bound {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for t in &frontier {
            for m in alphabet {
                next.push(t.extended(m.clone()));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.sort();
    out
}

/// Groups traces by their canonical image under the relation; traces in the
/// same group are exactly the trace-equivalent ones.
pub(crate) fn trace_classes(
    alphabet: &BTreeSet<Message>,
    bound: usize,
    rel: &Relation,
) -> BTreeMap<Vec<MsgKey>, Vec<Trace>> {
    let mut classes: BTreeMap<Vec<MsgKey>, Vec<Trace>> = BTreeMap::new();
    for t in all_traces(alphabet, bound) {
        classes.entry(rel.canon_trace(&t)).or_default().push(t);
    }
    classes
}

/// The erroneous-environment relation: for every pair of equivalent traces
/// `t1, t2` (over the alphabet, up to `trace_bound`), every offer of
/// `wc` at `t1` is either irrelevant or matched clause-equivalently in `wf`
/// at `t2`, and symmetrically every offer of `wf` at `t2` is irrelevant or
/// matched in `wc` at `t1`.
pub fn envs_erroneous_pair(
    wf: &EnvTable,
    wc: &EnvTable,
    rel: &Relation,
    alphabet: &BTreeSet<Message>,
    trace_bound: usize,
) -> Result<bool, EnvError> {
    if !matches!(rel, Relation::ByClauseAndEvent(..)) {
        return Err(EnvError::NotClauseAndEvent);
    }
    for table in [wf, wc] {
        if trace_bound > table.depth() {
            return Err(EnvError::BoundMismatch { bound: trace_bound, depth: table.depth() });
        }
    }
    let classes = trace_classes(alphabet, trace_bound, rel);
    Ok(erroneous_pair_on_classes(wf, wc, rel, &classes))
}

/// The two conditions of the erroneous-environment relation over a
/// pre-grouped trace-class table (the classes depend only on alphabet,
/// relation, and bound, so callers checking many pairs hoist them).
pub(crate) fn erroneous_pair_on_classes(
    wf: &EnvTable,
    wc: &EnvTable,
    rel: &Relation,
    classes: &BTreeMap<Vec<MsgKey>, Vec<Trace>>,
) -> bool {
    let clause = rel.clause().expect("relation carries a clause");
    let match_rel = Relation::ByClause(clause.clone());
    let matched = |m: &Message, pool: Option<&BTreeSet<Message>>| {
        msg_irrelevant(m, rel)
            || pool.is_some_and(|p| {
                p.iter().any(|other| msg_equiv(Some(m), Some(other), &match_rel))
            })
    };
    for class in classes.values() {
        if class
            .iter()
            .all(|t| wc.offers_ref(t).is_none() && wf.offers_ref(t).is_none())
        {
            continue;
        }
        for t1 in class {
            let correct_side = wc.offers_ref(t1);
            for t2 in class {
                let faulty_side = wf.offers_ref(t2);
                if let Some(cs) = correct_side {
                    if !cs.iter().all(|m| matched(m, faulty_side)) {
                        return false;
                    }
                }
                if let Some(fs) = faulty_side {
                    if !fs.iter().all(|m| matched(m, correct_side)) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// A table is a valid environment for the relation iff it is an erroneous
/// environment to itself.
pub fn env_valid(
    env: &EnvTable,
    rel: &Relation,
    alphabet: &BTreeSet<Message>,
    trace_bound: usize,
) -> Result<bool, EnvError> {
    envs_erroneous_pair(env, env, rel, alphabet, trace_bound)
}

/// Enumerates every valid table over traces of length at most `depth` whose
/// per-trace offer sets have at most `max_offers` messages, in a fixed
/// deterministic order. Offers are drawn from the input messages of the
/// alphabet; trace keys range over the whole alphabet.
pub fn enumerate_environments(
    alphabet: &BTreeSet<Message>,
    depth: usize,
    max_offers: usize,
    rel: &Relation,
) -> Box<dyn Iterator<Item = EnvTable>> {
    let inputs: Vec<Message> = alphabet.iter().filter(|m| m.is_input()).cloned().collect();
    // The per-class structure below assumes relevance under the full
    // relation and under its clause part coincide for inputs, which fails
    // only when the output event's port collides with an input port.
    let structured_ok = match rel {
        Relation::ByClauseAndEvent(clause, _) => inputs.iter().all(|m| {
            msg_irrelevant(m, rel)
                == msg_irrelevant(m, &Relation::ByClause(clause.clone()))
        }),
        _ => false,
    };
    if structured_ok {
        enumerate_structured(alphabet, &inputs, depth, max_offers, rel)
    } else {
        enumerate_filtered(alphabet, &inputs, depth, max_offers, rel)
    }
}

/// Fast path: a table is valid iff the clause-key set of its relevant offers
/// is constant on every trace-equivalence class. Enumerate per class a key
/// set, then per trace any offer set realizing exactly those keys.
fn enumerate_structured(
    alphabet: &BTreeSet<Message>,
    inputs: &[Message],
    depth: usize,
    max_offers: usize,
    rel: &Relation,
) -> Box<dyn Iterator<Item = EnvTable>> {
    let clause_rel = match rel {
        Relation::ByClauseAndEvent(clause, _) => Relation::ByClause(clause.clone()),
        _ => unreachable!("caller checked the relation shape"),
    };
    // all offer subsets within the size budget, keyed by realized key set
    let mut by_keys: BTreeMap<BTreeSet<MsgKey>, Vec<BTreeSet<Message>>> = BTreeMap::new();
    for mask in 0u64..(1u64 << inputs.len()) {
        let subset: BTreeSet<Message> = inputs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, m)| m.clone())
            .collect();
        if subset.len() > max_offers {
            continue;
        }
        let keys: BTreeSet<MsgKey> =
            subset.iter().filter_map(|m| clause_rel.msg_key(m)).collect();
        by_keys.entry(keys).or_default().push(subset);
    }

    type ClassAssignment = Vec<(Trace, BTreeSet<Message>)>;
    let classes: Vec<Vec<Trace>> =
        trace_classes(alphabet, depth, rel).into_values().collect();
    // per class: every (key set, per-trace realization) combination
    let mut class_assignments: Vec<Vec<ClassAssignment>> = Vec::new();
    for class in &classes {
        let mut assignments = Vec::new();
        for options in by_keys.values() {
            let mut idx = vec![0usize; class.len()];
            loop {
                assignments.push(
                    class
                        .iter()
                        .zip(&idx)
                        .map(|(t, &i)| (t.clone(), options[i].clone()))
                        .collect::<Vec<_>>(),
                );
                // odometer over per-trace realization choices
                let mut pos = 0;
                loop {
                    if pos == idx.len() {
                        break;
                    }
                    idx[pos] += 1;
                    if idx[pos] < options.len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
        }
        class_assignments.push(assignments);
    }

    let total: usize = class_assignments.iter().map(Vec::len).product();
    let mut cursor = vec![0usize; class_assignments.len()];
    let mut produced = 0usize;
    Box::new(std::iter::from_fn(move || {
        if produced >= total {
            return None;
        }
        let mut offers: BTreeMap<Trace, BTreeSet<Message>> = BTreeMap::new();
        for (class_idx, &choice) in cursor.iter().enumerate() {
            for (t, set) in &class_assignments[class_idx][choice] {
                if !set.is_empty() {
                    offers.insert(t.clone(), set.clone());
                }
            }
        }
        // advance the cross-class odometer
        let mut pos = 0;
        while pos < cursor.len() {
            cursor[pos] += 1;
            if cursor[pos] < class_assignments[pos].len() {
                break;
            }
            cursor[pos] = 0;
            pos += 1;
        }
        produced += 1;
        Some(EnvTable::new(depth, offers).expect("constructed offers are valid inputs"))
    }))
}

/// General path: enumerate every per-trace assignment of offer subsets and
/// keep the tables that pass [`env_valid`]. Only usable at micro bounds.
fn enumerate_filtered(
    alphabet: &BTreeSet<Message>,
    inputs: &[Message],
    depth: usize,
    max_offers: usize,
    rel: &Relation,
) -> Box<dyn Iterator<Item = EnvTable>> {
    let traces = all_traces(alphabet, depth);
    let mut subsets: Vec<BTreeSet<Message>> = Vec::new();
    for mask in 0u64..(1u64 << inputs.len()) {
        let subset: BTreeSet<Message> = inputs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, m)| m.clone())
            .collect();
        if subset.len() <= max_offers {
            subsets.push(subset);
        }
    }
    subsets.sort();
    let alphabet = alphabet.clone();
    let rel = rel.clone();
    let total = subsets.len().checked_pow(traces.len() as u32).expect("family too large");
    let mut cursor = vec![0usize; traces.len()];
    let mut produced = 0usize;
    Box::new(std::iter::from_fn(move || {
        while produced < total {
            let offers: BTreeMap<Trace, BTreeSet<Message>> = traces
                .iter()
                .zip(&cursor)
                .filter(|(_, &i)| !subsets[i].is_empty())
                .map(|(t, &i)| (t.clone(), subsets[i].clone()))
                .collect();
            let mut pos = 0;
            while pos < cursor.len() {
                cursor[pos] += 1;
                if cursor[pos] < subsets.len() {
                    break;
                }
                cursor[pos] = 0;
                pos += 1;
            }
            produced += 1;
            let table = EnvTable::new(depth, offers).expect("offers are inputs");
            if env_valid(&table, &rel, &alphabet, depth).expect("relation shape checked") {
                return Some(table);
            }
        }
        None
    }))
}
