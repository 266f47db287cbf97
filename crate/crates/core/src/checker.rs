//! Bounded verification of clause and fault-tree correctness, with
//! counterexample extraction, simplification, and an independent naive
//! oracle.
//!
//! A clause (plus the tree's output event) is correct within bounds when for
//! every valid pair of related environment tables and every trace the
//! component communicates under the faulty-side table, the correct-side
//! table admits an event-equivalent trace. `CorrectWithinBounds` means no
//! counterexample exists inside the enumerated family; `Refuted` carries a
//! re-checkable counterexample, with the existential witness search cut at
//! `witness_depth`.
//!
//! # Search structure
//!
//! Valid tables cannot be enumerated literally at useful bounds. Instead
//! `check_clause` exploits their shape: a table is valid iff the clause-key
//! set of its relevant offers is constant on every trace-equivalence class,
//! and a related pair must realize the same class-indexed key map. For a
//! candidate fault trace this leaves exactly one adversarial freedom per
//! class (which value realizes an EXISTS key), so witness existence becomes
//! an alternating game over (state, matched-prefix, length) positions. The
//! naive transcription [`check_clause_oracle`] enumerates tables literally
//! and cross-checks this reduction at micro bounds.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::cft::Cft;
use crate::component::{Component, Direction, Message, Trace};
use crate::environment::{
    all_traces, env_valid, envs_erroneous_pair, enumerate_environments, trace_classes, EnvError,
    EnvTable,
};
use crate::equivalence::{msg_equiv, msg_irrelevant, trace_equiv, MsgKey, Relation};
use crate::formula::{EventRef, NegClause};

/// Enumeration bounds for the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub trace_depth: usize,
    pub env_depth: usize,
    pub max_offers: usize,
    /// Search depth for the existential witness; at least `trace_depth`.
    pub witness_depth: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("witness depth {witness} is smaller than trace depth {trace}")]
    BadBounds { witness: usize, trace: usize },
    #[error("precondition violated: component '{component}' is not deterministic ({first})")]
    PreconditionViolated { component: String, first: String },
    #[error("output event port '{0}' is an input port of the component")]
    OutputEventOnInputPort(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("simplification not counterexample-preserving: {0}")]
    SimplificationNotPreserving(CexDefect),
}

impl Bounds {
    pub fn new(
        trace_depth: usize,
        env_depth: usize,
        max_offers: usize,
        witness_depth: usize,
    ) -> Result<Self, CheckError> {
        if witness_depth < trace_depth {
            return Err(CheckError::BadBounds { witness: witness_depth, trace: trace_depth });
        }
        Ok(Bounds { trace_depth, env_depth, max_offers, witness_depth })
    }

    /// Default witness depth: the trace depth plus room for the correct run
    /// to flush pending outputs (twice the state count).
    pub fn with_default_witness(
        trace_depth: usize,
        env_depth: usize,
        max_offers: usize,
        state_count: usize,
    ) -> Self {
        Bounds {
            trace_depth,
            env_depth,
            max_offers,
            witness_depth: trace_depth + 2 * state_count,
        }
    }
}

/// A refutation: a related pair of environment tables and a fault trace with
/// no event-equivalent witness within bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub env_f: EnvTable,
    pub env_c: EnvTable,
    pub trace_f: Trace,
    /// Reporting aid: maximal correct-side runs and the index where each
    /// stopped matching the fault trace.
    pub failed_witnesses: Vec<(Trace, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    CorrectWithinBounds,
    Refuted(Box<Counterexample>),
}

impl Verdict {
    pub fn is_correct(&self) -> bool {
        matches!(self, Verdict::CorrectWithinBounds)
    }
}

/// Why a claimed counterexample failed re-verification.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CexDefect {
    #[error("env_f is not a valid environment")]
    EnvFInvalid,
    #[error("env_c is not a valid environment")]
    EnvCInvalid,
    #[error("tables are not an erroneous pair")]
    NotErroneousPair,
    #[error("fault trace exceeds trace depth")]
    TraceTooLong,
    #[error("component does not accept the fault trace under env_f")]
    TraceNotAccepted,
    #[error("witness {0} is event-equivalent to the fault trace")]
    WitnessExists(Trace),
}

/// Per-clause verdicts for a whole fault tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CftReport {
    pub output_event: EventRef,
    pub clauses: Vec<(NegClause, Verdict)>,
}

impl CftReport {
    pub fn all_correct(&self) -> bool {
        self.clauses.iter().all(|(_, v)| v.is_correct())
    }

    pub fn refuted(&self) -> impl Iterator<Item = (&NegClause, &Counterexample)> {
        self.clauses.iter().filter_map(|(c, v)| match v {
            Verdict::Refuted(cex) => Some((c, cex.as_ref())),
            Verdict::CorrectWithinBounds => None,
        })
    }
}

fn precheck(comp: &Component, output_event: &EventRef) -> Result<(), CheckError> {
    let violations = comp.validate_deterministic();
    if let Some(first) = violations.first() {
        return Err(CheckError::PreconditionViolated {
            component: comp.name().to_string(),
            first: first.to_string(),
        });
    }
    if let Some(port) = comp.port(&output_event.port) {
        if port.direction == Direction::In {
            return Err(CheckError::OutputEventOnInputPort(output_event.port.clone()));
        }
    }
    Ok(())
}

/// Bounded correctness of one clause and output event against a component.
///
/// Semantically quantifies over every valid environment pair within the
/// bounds; the reported counterexample is the lexicographically least found,
/// ordered by (env_f serialization, env_c serialization, fault trace).
pub fn check_clause(
    comp: &Component,
    clause: &NegClause,
    output_event: &EventRef,
    bounds: &Bounds,
) -> Result<Verdict, CheckError> {
    Bounds::new(bounds.trace_depth, bounds.env_depth, bounds.max_offers, bounds.witness_depth)?;
    precheck(comp, output_event)?;
    let rel = Relation::ByClauseAndEvent(clause.clone(), output_event.clone());
    let search = ClauseSearch::new(comp, rel, bounds);

    let mut best: Option<(String, String, Trace, Counterexample)> = None;
    for trace_f in search.fault_trace_candidates() {
        let Some(plan) = search.refutation_plan(&trace_f) else {
            continue;
        };
        let cex = search.materialize(&trace_f, &plan);
        let key = (cex.env_f.to_string(), cex.env_c.to_string(), trace_f.clone());
        let candidate = (key.0, key.1, key.2, cex);
        let replace = match &best {
            None => true,
            Some((f, c, t, _)) => {
                (&candidate.0, &candidate.1, &candidate.2) < (f, c, t)
            }
        };
        if replace {
            best = Some(candidate);
        }
    }
    match best {
        Some((_, _, _, cex)) => Ok(Verdict::Refuted(Box::new(cex))),
        None => Ok(Verdict::CorrectWithinBounds),
    }
}

/// Runs [`check_clause`] for every clause of the tree's negated formula.
pub fn check_cft(comp: &Component, cft: &Cft, bounds: &Bounds) -> Result<CftReport, CheckError> {
    let mut clauses = Vec::new();
    for clause in cft.clauses() {
        let verdict = check_clause(comp, &clause, &cft.output_event, bounds)?;
        clauses.push((clause, verdict));
    }
    Ok(CftReport { output_event: cft.output_event.clone(), clauses })
}

/// Naive transcription of the correctness definition: enumerate every valid
/// table, filter related pairs, enumerate fault traces, search witnesses.
/// No pruning, no sharing; usable only at micro bounds, as the independent
/// oracle for [`check_clause`].
pub fn check_clause_oracle(
    comp: &Component,
    clause: &NegClause,
    output_event: &EventRef,
    bounds: &Bounds,
) -> Result<Verdict, CheckError> {
    Bounds::new(bounds.trace_depth, bounds.env_depth, bounds.max_offers, bounds.witness_depth)?;
    precheck(comp, output_event)?;
    let rel = Relation::ByClauseAndEvent(clause.clone(), output_event.clone());
    let alphabet = comp.alphabet();
    let tables: Vec<EnvTable> =
        enumerate_environments(&alphabet, bounds.env_depth, bounds.max_offers, &rel).collect();
    // the per-pair relation quantifies over trace classes that depend only
    // on (alphabet, relation, bound); compute them once and index offers by
    // trace position so the pair scan avoids repeated map lookups
    let classes = trace_classes(&alphabet, bounds.env_depth, &rel);
    let traces = all_traces(&alphabet, bounds.env_depth);
    let trace_pos: HashMap<&Trace, usize> =
        traces.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let class_members: Vec<Vec<usize>> = classes
        .values()
        .map(|members| members.iter().map(|t| trace_pos[t]).collect())
        .collect();
    let indexed_offers: Vec<Vec<Option<&BTreeSet<Message>>>> = tables
        .iter()
        .map(|table| traces.iter().map(|t| table.offers_ref(t)).collect())
        .collect();
    // plain memoization of pure subroutines; the quantifier structure stays
    // a literal enumeration
    let accepted: Vec<Vec<Trace>> = tables
        .iter()
        .map(|t| accepted_under(comp, t, bounds.trace_depth))
        .collect();
    // intern fault-trace candidates so the witness memo keys on small ids
    let fault_ids: BTreeMap<&Trace, usize> = {
        let all: BTreeSet<&Trace> = accepted.iter().flatten().collect();
        all.into_iter().enumerate().map(|(i, t)| (t, i)).collect()
    };
    let serialized: Vec<String> = tables.iter().map(ToString::to_string).collect();
    let mut witness_runs: Vec<Option<Vec<Trace>>> = vec![None; tables.len()];
    let mut witness_found: Vec<Vec<Option<bool>>> =
        vec![vec![None; fault_ids.len()]; tables.len()];

    let match_rel = Relation::ByClause(clause.clone());
    let mut best: Option<(&str, &str, &Trace, usize, usize)> = None;
    for fi in 0..tables.len() {
        for ci in 0..tables.len() {
            let in_relation = class_members.iter().all(|members| {
                erroneous_pair_on_indexed(
                    &indexed_offers[fi],
                    &indexed_offers[ci],
                    &rel,
                    &match_rel,
                    members,
                )
            });
            if !in_relation {
                continue;
            }
            for trace_f in &accepted[fi] {
                let id = fault_ids[trace_f];
                let witnessed = *witness_found[ci][id].get_or_insert_with(|| {
                    let runs = witness_runs[ci].get_or_insert_with(|| {
                        accepted_under(comp, &tables[ci], bounds.witness_depth)
                    });
                    runs.iter().any(|t| trace_equiv(trace_f, t, &rel))
                });
                if witnessed {
                    continue;
                }
                let candidate = (serialized[fi].as_str(), serialized[ci].as_str(), trace_f);
                let replace = match &best {
                    None => true,
                    Some((f, c, t, _, _)) => candidate < (f, c, t),
                };
                if replace {
                    best = Some((candidate.0, candidate.1, candidate.2, fi, ci));
                }
            }
        }
    }
    match best {
        Some((_, _, trace_f, fi, ci)) => {
            let failed = harvest_failed_witnesses(
                comp,
                &tables[ci],
                trace_f,
                &rel,
                bounds.witness_depth,
            );
            Ok(Verdict::Refuted(Box::new(Counterexample {
                env_f: tables[fi].clone(),
                env_c: tables[ci].clone(),
                trace_f: trace_f.clone(),
                failed_witnesses: failed,
            })))
        }
        None => Ok(Verdict::CorrectWithinBounds),
    }
}

/// The two erroneous-pair conditions over one class, with offers indexed by
/// trace position. Mirrors `erroneous_pair_on_classes`; a test keeps the two
/// in agreement.
fn erroneous_pair_on_indexed(
    faulty: &[Option<&BTreeSet<Message>>],
    correct: &[Option<&BTreeSet<Message>>],
    rel: &Relation,
    match_rel: &Relation,
    members: &[usize],
) -> bool {
    let matched = |m: &Message, pool: Option<&BTreeSet<Message>>| {
        msg_irrelevant(m, rel)
            || pool.is_some_and(|p| {
                p.iter().any(|other| msg_equiv(Some(m), Some(other), match_rel))
            })
    };
    if members.iter().all(|&i| faulty[i].is_none() && correct[i].is_none()) {
        return true;
    }
    for &t1 in members {
        let correct_side = correct[t1];
        for &t2 in members {
            let faulty_side = faulty[t2];
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
    true
}

/// Direct transcription of the correctness definition restricted to the
/// bounds, for re-checking claimed counterexamples.
pub fn verify_counterexample(
    comp: &Component,
    cex: &Counterexample,
    rel: &Relation,
    bounds: &Bounds,
) -> Result<(), CexDefect> {
    let alphabet = comp.alphabet();
    let check = |table: &EnvTable| env_valid(table, rel, &alphabet, table.depth());
    match check(&cex.env_f) {
        Ok(true) => {}
        _ => return Err(CexDefect::EnvFInvalid),
    }
    match check(&cex.env_c) {
        Ok(true) => {}
        _ => return Err(CexDefect::EnvCInvalid),
    }
    let bound = cex.env_f.depth().min(cex.env_c.depth());
    match envs_erroneous_pair(&cex.env_f, &cex.env_c, rel, &alphabet, bound) {
        Ok(true) => {}
        _ => return Err(CexDefect::NotErroneousPair),
    }
    if cex.trace_f.len() > bounds.trace_depth {
        return Err(CexDefect::TraceTooLong);
    }
    if comp.accepts_under_env(&cex.env_f, &cex.trace_f) != Ok(true) {
        return Err(CexDefect::TraceNotAccepted);
    }
    if let Some(witness) = find_witness(comp, &cex.env_c, &cex.trace_f, rel, bounds.witness_depth)
    {
        return Err(CexDefect::WitnessExists(witness));
    }
    Ok(())
}

/// Counterexample simplification: strips correct-side irrelevant offers,
/// narrows both tables to what the fault trace needs (all irrelevant inputs
/// plus the exact next input on the faulty side, a single equivalent message
/// on the correct side), empties everything else, and re-verifies.
pub fn simplify_counterexample(
    comp: &Component,
    cex: &Counterexample,
    rel: &Relation,
    bounds: &Bounds,
) -> Result<Counterexample, CheckError> {
    let alphabet = comp.alphabet();
    let irrelevant_inputs: BTreeSet<Message> = alphabet
        .iter()
        .filter(|m| m.is_input() && msg_irrelevant(m, rel))
        .cloned()
        .collect();

    // pre-strip: the correct side offers no irrelevant inputs
    let stripped: BTreeMap<Trace, BTreeSet<Message>> = cex
        .env_c
        .entries()
        .map(|(t, set)| {
            (t.clone(), set.iter().filter(|m| !msg_irrelevant(m, rel)).cloned().collect())
        })
        .collect();
    let env_c_stripped = EnvTable::new(cex.env_c.depth(), stripped).expect("still inputs");

    // needed inputs per canonical prefix image of the fault trace
    let mut needed: BTreeMap<Vec<MsgKey>, BTreeSet<Message>> = BTreeMap::new();
    for (i, m) in cex.trace_f.iter().enumerate() {
        if m.is_input() {
            needed
                .entry(rel.canon_trace(&cex.trace_f.prefix(i)))
                .or_default()
                .insert(m.clone());
        }
    }

    let mut offers_f: BTreeMap<Trace, BTreeSet<Message>> = BTreeMap::new();
    let mut offers_c: BTreeMap<Trace, BTreeSet<Message>> = BTreeMap::new();
    for t in all_traces(&alphabet, cex.env_f.depth().min(cex.env_c.depth())) {
        let canon = rel.canon_trace(&t);
        if let Some(next_inputs) = needed.get(&canon) {
            // equivalent to a proper prefix with a next input
            let mut f_set = irrelevant_inputs.clone();
            f_set.extend(next_inputs.iter().cloned());
            offers_f.insert(t.clone(), f_set);
            let mut c_set = BTreeSet::new();
            for p_v in next_inputs {
                if msg_irrelevant(p_v, rel) {
                    continue;
                }
                if let Some(m) = env_c_stripped
                    .offers(&t)
                    .iter()
                    .find(|m| msg_equiv(Some(m), Some(p_v), rel))
                {
                    c_set.insert(m.clone());
                }
            }
            if !c_set.is_empty() {
                offers_c.insert(t.clone(), c_set);
            }
        } else {
            // no equivalent prefix needing an input: strip relevant offers
            let f_set: BTreeSet<Message> = cex
                .env_f
                .offers(&t)
                .into_iter()
                .filter(|m| msg_irrelevant(m, rel))
                .collect();
            if !f_set.is_empty() {
                offers_f.insert(t.clone(), f_set);
            }
        }
    }
    let simplified = Counterexample {
        env_f: EnvTable::new(cex.env_f.depth(), offers_f).expect("inputs only"),
        env_c: EnvTable::new(cex.env_c.depth(), offers_c).expect("inputs only"),
        trace_f: cex.trace_f.clone(),
        failed_witnesses: Vec::new(),
    };
    verify_counterexample(comp, &simplified, rel, bounds)
        .map_err(CheckError::SimplificationNotPreserving)?;
    let failed = harvest_failed_witnesses(
        comp,
        &simplified.env_c,
        &simplified.trace_f,
        rel,
        bounds.witness_depth,
    );
    Ok(Counterexample { failed_witnesses: failed, ..simplified })
}

/// All traces the component communicates under the table, up to `depth`.
/// Inputs are taken from the table's offers at the current prefix.
fn accepted_under(comp: &Component, env: &EnvTable, depth: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    let mut stack = vec![(comp.initial().to_string(), Trace::empty())];
    while let Some((state, trace)) = stack.pop() {
        out.push(trace.clone());
        if trace.len() == depth {
            continue;
        }
        // reverse order so the stack pops extensions in canonical order
        let extensions: Vec<Message> = comp
            .enabled(&state)
            .into_iter()
            .filter(|m| !m.is_input() || env.offers(&trace).contains(m))
            .collect();
        for m in extensions.into_iter().rev() {
            let next = comp.step(&state, &m).expect("enabled").to_string();
            stack.push((next, trace.extended(m)));
        }
    }
    out.sort();
    out
}

/// First accepted trace under `env` (up to `depth`) event-equivalent to
/// `target`, if any.
fn find_witness(
    comp: &Component,
    env: &EnvTable,
    target: &Trace,
    rel: &Relation,
    depth: usize,
) -> Option<Trace> {
    accepted_under(comp, env, depth)
        .into_iter()
        .find(|t| trace_equiv(target, t, rel))
}

/// Maximal accepted runs under the table, each with the index where its
/// equivalence progress against `target` first broke (the run length when it
/// simply ran out of matched messages).
fn harvest_failed_witnesses(
    comp: &Component,
    env: &EnvTable,
    target: &Trace,
    rel: &Relation,
    depth: usize,
) -> Vec<(Trace, usize)> {
    const MAX_REPORTED: usize = 8;
    let accepted = accepted_under(comp, env, depth);
    let accepted_set: BTreeSet<&Trace> = accepted.iter().collect();
    let target_canon = rel.canon_trace(target);
    let mut out = Vec::new();
    for t in &accepted {
        let is_maximal = t.len() == depth
            || !accepted_set
                .iter()
                .any(|other| other.len() == t.len() + 1 && other.0[..t.len()] == t.0[..]);
        if !is_maximal {
            continue;
        }
        let mut matched = 0usize;
        let mut divergence = t.len();
        for (i, m) in t.iter().enumerate() {
            let Some(key) = rel.msg_key(m) else {
                continue;
            };
            if target_canon.get(matched) == Some(&key) {
                matched += 1;
            } else {
                divergence = i;
                break;
            }
        }
        out.push((t.clone(), divergence));
        if out.len() == MAX_REPORTED {
            break;
        }
    }
    out
}

/// Shared state for the reduced clause search.
struct ClauseSearch<'a> {
    comp: &'a Component,
    rel: Relation,
    clause_rel: Relation,
    bounds: Bounds,
    states: Vec<String>,
    state_index: BTreeMap<String, usize>,
}

/// The per-fault-trace refutation data: the single offer key required at
/// each touched trace class, and the winning adversary value choices.
struct RefutationPlan {
    /// canonical prefix image -> the one relevant input used there
    required: BTreeMap<Vec<MsgKey>, Message>,
    /// canonical prefix image -> irrelevant next inputs at exact prefixes
    extra_irrelevant: BTreeMap<Trace, Message>,
    /// relevant message sequence of the fault trace
    relevant: Vec<Message>,
}

impl<'a> ClauseSearch<'a> {
    fn new(comp: &'a Component, rel: Relation, bounds: &Bounds) -> Self {
        let clause_rel = match &rel {
            Relation::ByClauseAndEvent(clause, _) => Relation::ByClause(clause.clone()),
            other => other.clone(),
        };
        let states: Vec<String> = comp.states().map(str::to_string).collect();
        let state_index =
            states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        ClauseSearch { comp, rel, clause_rel, bounds: *bounds, states, state_index }
    }

    /// Accepted traces up to `trace_depth` whose inputs all sit at prefixes
    /// within the table depth (deeper inputs can never be offered).
    fn fault_trace_candidates(&self) -> Vec<Trace> {
        let mut out = Vec::new();
        let mut stack = vec![(self.comp.initial().to_string(), Trace::empty())];
        while let Some((state, trace)) = stack.pop() {
            out.push(trace.clone());
            if trace.len() == self.bounds.trace_depth {
                continue;
            }
            let extensions: Vec<Message> = self
                .comp
                .enabled(&state)
                .into_iter()
                .filter(|m| !m.is_input() || trace.len() <= self.bounds.env_depth)
                .collect();
            for m in extensions.into_iter().rev() {
                let next = self.comp.step(&state, &m).expect("enabled").to_string();
                stack.push((next, trace.extended(m)));
            }
        }
        out.sort();
        out
    }

    /// Builds the required-key map for the candidate and decides the
    /// blocking game. `Some` iff the candidate refutes the clause: the
    /// offer budget is respected and no equivalent witness survives the
    /// adversary's value choices.
    fn refutation_plan(&self, trace_f: &Trace) -> Option<RefutationPlan> {
        let mut required: BTreeMap<Vec<MsgKey>, Message> = BTreeMap::new();
        let mut extra_irrelevant: BTreeMap<Trace, Message> = BTreeMap::new();
        for (i, m) in trace_f.iter().enumerate() {
            if !m.is_input() {
                continue;
            }
            let prefix = trace_f.prefix(i);
            let canon = self.rel.canon_trace(&prefix);
            if msg_irrelevant(m, &self.rel) {
                extra_irrelevant.insert(prefix, m.clone());
            } else {
                // the canonical image strictly grows past a relevant message,
                // so one trace never needs two relevant inputs in one class
                let previous = required.insert(canon, m.clone());
                assert!(previous.as_ref().is_none_or(|p| p == m));
            }
        }
        // offer budget per touched class
        for (i, m) in trace_f.iter().enumerate() {
            if !m.is_input() {
                continue;
            }
            let canon = self.rel.canon_trace(&trace_f.prefix(i));
            let key_count = usize::from(required.contains_key(&canon));
            let budget = if msg_irrelevant(m, &self.rel) { key_count + 1 } else { key_count };
            if budget > self.bounds.max_offers {
                return None;
            }
        }

        let relevant: Vec<Message> = trace_f
            .iter()
            .filter(|m| !msg_irrelevant(m, &self.rel))
            .cloned()
            .collect();
        let mut game = BlockingGame {
            search: self,
            relevant: &relevant,
            memo: HashMap::new(),
        };
        let initial = self.state_index[self.comp.initial()];
        if game.defender_wins(initial, 0, 0) {
            None
        } else {
            Some(RefutationPlan { required, extra_irrelevant, relevant })
        }
    }

    /// Builds the canonical environment pair realizing the plan.
    fn materialize(&self, trace_f: &Trace, plan: &RefutationPlan) -> Counterexample {
        let alphabet = self.comp.alphabet();
        let mut offers_f: BTreeMap<Trace, BTreeSet<Message>> = BTreeMap::new();
        let mut offers_c: BTreeMap<Trace, BTreeSet<Message>> = BTreeMap::new();
        let mut game = BlockingGame {
            search: self,
            relevant: &plan.relevant,
            memo: HashMap::new(),
        };
        for t in all_traces(&alphabet, self.bounds.env_depth) {
            let canon = self.rel.canon_trace(&t);
            let mut f_set = BTreeSet::new();
            if let Some(used) = plan.required.get(&canon) {
                f_set.insert(used.clone());
                // correct side: one message per key, values chosen to block
                let offer = match self.clause_rel.msg_key(used) {
                    Some(MsgKey { port, value: Some(v) }) => Message::input(port, v),
                    Some(MsgKey { port, value: None }) => {
                        let value = self.blocking_value(&mut game, &t, &port, canon.len());
                        Message::input(port, value)
                    }
                    None => unreachable!("required offers are clause-relevant"),
                };
                offers_c.insert(t.clone(), BTreeSet::from([offer]));
            }
            if let Some(extra) = plan.extra_irrelevant.get(&t) {
                f_set.insert(extra.clone());
            }
            if !f_set.is_empty() {
                offers_f.insert(t.clone(), f_set);
            }
        }
        let env_f =
            EnvTable::new(self.bounds.env_depth, offers_f).expect("offers are inputs");
        let env_c =
            EnvTable::new(self.bounds.env_depth, offers_c).expect("offers are inputs");
        let failed = harvest_failed_witnesses(
            self.comp,
            &env_c,
            trace_f,
            &self.rel,
            self.bounds.witness_depth,
        );
        Counterexample { env_f, env_c, trace_f: trace_f.clone(), failed_witnesses: failed }
    }

    /// The adversary's value choice for an EXISTS key at a concrete trace:
    /// the least domain value that keeps the defender losing, falling back
    /// to the least value outright.
    fn blocking_value(
        &self,
        game: &mut BlockingGame<'_, '_>,
        at: &Trace,
        port: &str,
        matched: usize,
    ) -> String {
        let domain = &self.comp.port(port).expect("declared port").domain;
        let mut state = self.comp.initial().to_string();
        for m in at.iter() {
            match self.comp.step(&state, m) {
                Some(next) => state = next.to_string(),
                None => return domain[0].clone(),
            }
        }
        for v in domain {
            let m = Message::input(port, v.clone());
            match self.comp.step(&state, &m) {
                Some(next) => {
                    let next_idx = self.state_index[next];
                    if !game.defender_wins(next_idx, matched + 1, at.len() + 1) {
                        return v.clone();
                    }
                }
                None => return v.clone(),
            }
        }
        domain[0].clone()
    }
}

/// The witness-existence game for one fault trace. Positions are (state,
/// matched relevant prefix, trace length); the defender extends the witness,
/// the adversary picks offered values for EXISTS keys.
struct BlockingGame<'s, 'a> {
    search: &'s ClauseSearch<'a>,
    relevant: &'s [Message],
    memo: HashMap<(usize, usize, usize), bool>,
}

impl BlockingGame<'_, '_> {
    fn defender_wins(&mut self, state: usize, matched: usize, len: usize) -> bool {
        if matched == self.relevant.len() {
            return true;
        }
        if len == self.search.bounds.witness_depth {
            return false;
        }
        if let Some(&v) = self.memo.get(&(state, matched, len)) {
            return v;
        }
        // cycle guard: a position is losing while being evaluated
        self.memo.insert((state, matched, len), false);
        let state_name = self.search.states[state].clone();
        let needed = &self.relevant[matched];
        let mut win = false;

        for m in self.search.comp.enabled(&state_name) {
            if m.is_input() {
                continue; // handled via offers below
            }
            let next = self.search.state_index[self.search.comp.step(&state_name, &m).unwrap()];
            if msg_irrelevant(&m, &self.search.rel) {
                win |= self.defender_wins(next, matched, len + 1);
            } else if msg_equiv(Some(&m), Some(needed), &self.search.rel) {
                win |= self.defender_wins(next, matched + 1, len + 1);
            }
            if win {
                break;
            }
        }

        if !win && needed.is_input() && len <= self.search.bounds.env_depth {
            match self.search.clause_rel.msg_key(needed) {
                Some(MsgKey { port, value: Some(v) }) => {
                    let m = Message::input(port, v);
                    if let Some(next) = self.search.comp.step(&state_name, &m) {
                        let next = self.search.state_index[next];
                        win |= self.defender_wins(next, matched + 1, len + 1);
                    }
                }
                Some(MsgKey { port, value: None }) => {
                    // adversary picks the offered value: defender must win
                    // for every choice
                    let domain = self.search.comp.port(&port).expect("declared").domain.clone();
                    let mut all = true;
                    for v in &domain {
                        let m = Message::input(port.clone(), v.clone());
                        match self.search.comp.step(&state_name, &m) {
                            Some(next) => {
                                let next = self.search.state_index[next];
                                if !self.defender_wins(next, matched + 1, len + 1) {
                                    all = false;
                                    break;
                                }
                            }
                            None => {
                                all = false;
                                break;
                            }
                        }
                    }
                    win |= all;
                }
                None => unreachable!("relevant inputs carry a clause key"),
            }
        }

        self.memo.insert((state, matched, len), win);
        win
    }
}
