//! Randomized invariants: negated-DNF round trips, substitution ordering,
//! equivalence-relation laws, and the erroneous-environment relation against
//! a direct transcription.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use cft_core::component::{Message, Trace};
use cft_core::environment::{envs_erroneous_pair, EnvTable};
use cft_core::equivalence::{filter_relevant, msg_equiv, msg_irrelevant, trace_equiv, Relation};
use cft_core::formula::{
    eval_clauses, for_each_assignment, EventKind, EventRef, Formula, NegClause,
};

// six possible events: ports e0..e2, both kinds
fn event_strategy() -> impl Strategy<Value = EventRef> {
    (0..3usize, any::<bool>()).prop_map(|(i, value)| {
        let port = format!("e{i}");
        if value {
            EventRef::value(port)
        } else {
            EventRef::exists(port)
        }
    })
}

fn formula_strategy() -> impl Strategy<Value = Formula> {
    let leaf = event_strategy().prop_map(Formula::Literal);
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
            prop::collection::vec(inner, 2..4).prop_map(Formula::Or),
        ]
    })
}

/// Truth-table check that the clause list is the negation of the formula.
fn clauses_negate(f: &Formula, clauses: &[NegClause]) -> bool {
    let mut events: BTreeSet<EventRef> = f.events();
    for c in clauses {
        events.extend(c.events().cloned());
    }
    let events: Vec<EventRef> = events.into_iter().collect();
    for_each_assignment(&events, |a| eval_clauses(clauses, a).unwrap() == !f.eval(a).unwrap())
}

proptest! {
    #[test]
    fn neg_dnf_round_trips_through_truth_table(f in formula_strategy()) {
        let clauses = f.neg_dnf();
        prop_assert!(!clauses.is_empty());
        prop_assert!(clauses_negate(&f, &clauses));
    }

    #[test]
    fn neg_dnf_is_deterministic(f in formula_strategy()) {
        let once: Vec<String> = f.neg_dnf().iter().map(ToString::to_string).collect();
        let twice: Vec<String> = f.neg_dnf().iter().map(ToString::to_string).collect();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn strict_substitution_entails_plain_when_target_holds(
        f in formula_strategy(),
        target in event_strategy(),
        replacement in formula_strategy(),
    ) {
        let plain = f.substitute(&target, &replacement);
        let strict = f.substitute_strict(&target, &replacement);
        let mut events: BTreeSet<EventRef> = plain.events();
        events.extend(strict.events());
        events.insert(target.clone());
        let events: Vec<EventRef> = events.into_iter().collect();
        let entails = for_each_assignment(&events, |a| {
            !a[&target] || !strict.eval(a).unwrap() || plain.eval(a).unwrap()
        });
        prop_assert!(entails);
    }
}

// message alphabet for trace properties: inputs p/r, outputs q/s, values 0..2
fn msg_strategy() -> impl Strategy<Value = Message> {
    (0..4usize, 0..3usize).prop_map(|(port, value)| match port {
        0 => Message::input("p", value.to_string()),
        1 => Message::input("r", value.to_string()),
        2 => Message::output("q", value.to_string()),
        _ => Message::output("s", value.to_string()),
    })
}

fn trace_strategy(max_len: usize) -> impl Strategy<Value = Trace> {
    prop::collection::vec(msg_strategy(), 0..=max_len).prop_map(Trace)
}

fn clause_strategy() -> impl Strategy<Value = NegClause> {
    prop::collection::btree_set(
        (0..4usize, any::<bool>()).prop_map(|(port, value)| {
            let name = ["p", "r", "q", "s"][port];
            if value {
                EventRef::value(name)
            } else {
                EventRef::exists(name)
            }
        }),
        1..3,
    )
    .prop_map(|events| NegClause::new(events).unwrap())
}

fn relation_strategy() -> impl Strategy<Value = Relation> {
    prop_oneof![
        (0..4usize, any::<bool>()).prop_map(|(port, value)| {
            let name = ["p", "r", "q", "s"][port];
            Relation::ByEvent(if value {
                EventRef::value(name)
            } else {
                EventRef::exists(name)
            })
        }),
        clause_strategy().prop_map(Relation::ByClause),
        (clause_strategy(), any::<bool>()).prop_map(|(c, value)| {
            Relation::ByClauseAndEvent(
                c,
                if value { EventRef::value("q") } else { EventRef::exists("q") },
            )
        }),
    ]
}

/// Mutates a trace without leaving its equivalence class: inserts or deletes
/// irrelevant messages, or re-values a message watched only by EXISTS events.
fn equivalent_mutation(t: &Trace, rel: &Relation, choice: usize, pos: usize) -> Trace {
    let mut msgs = t.0.clone();
    match choice % 3 {
        0 => {
            // ports x/y are never in the relation
            let filler = Message::output("x", "0");
            msgs.insert(pos % (msgs.len() + 1), filler);
        }
        1 => {
            if let Some(idx) = (0..msgs.len()).find(|i| msg_irrelevant(&msgs[*i], rel)) {
                msgs.remove(idx);
            }
        }
        _ => {
            for m in msgs.iter_mut() {
                let exists_only = !msg_irrelevant(m, rel)
                    && rel
                        .events()
                        .iter()
                        .all(|e| e.port != m.port || e.kind == EventKind::Exists);
                if exists_only {
                    m.value = ((pos % 3).to_string()).clone();
                    break;
                }
            }
        }
    }
    Trace(msgs)
}

proptest! {
    #[test]
    fn msg_equiv_is_symmetric(
        m1 in msg_strategy(),
        m2 in msg_strategy(),
        rel in relation_strategy(),
    ) {
        prop_assert_eq!(
            msg_equiv(Some(&m1), Some(&m2), &rel),
            msg_equiv(Some(&m2), Some(&m1), &rel)
        );
        prop_assert_eq!(msg_equiv(Some(&m1), None, &rel), msg_equiv(None, Some(&m1), &rel));
        prop_assert!(msg_equiv(Some(&m1), Some(&m1), &rel));
    }

    #[test]
    fn trace_equiv_is_symmetric_and_reflexive(
        t1 in trace_strategy(6),
        t2 in trace_strategy(6),
        rel in relation_strategy(),
    ) {
        prop_assert!(trace_equiv(&t1, &t1, &rel));
        prop_assert_eq!(trace_equiv(&t1, &t2, &rel), trace_equiv(&t2, &t1, &rel));
    }

    #[test]
    fn trace_equiv_matches_filter_oracle(
        t1 in trace_strategy(6),
        t2 in trace_strategy(6),
        rel in relation_strategy(),
    ) {
        let f1 = filter_relevant(&t1, &rel);
        let f2 = filter_relevant(&t2, &rel);
        let oracle = f1.len() == f2.len()
            && f1.iter().zip(f2.iter()).all(|(a, b)| msg_equiv(Some(a), Some(b), &rel));
        prop_assert_eq!(trace_equiv(&t1, &t2, &rel), oracle);
    }

    #[test]
    fn trace_equiv_is_transitive_on_mutated_triples(
        t1 in trace_strategy(5),
        rel in relation_strategy(),
        choices in prop::collection::vec((0..3usize, 0..7usize), 2),
    ) {
        let t2 = equivalent_mutation(&t1, &rel, choices[0].0, choices[0].1);
        let t3 = equivalent_mutation(&t2, &rel, choices[1].0, choices[1].1);
        prop_assert!(trace_equiv(&t1, &t2, &rel));
        prop_assert!(trace_equiv(&t2, &t3, &rel));
        prop_assert!(trace_equiv(&t1, &t3, &rel));
    }
}

// --- erroneous-environment relation vs a direct transcription ---

fn small_alphabet() -> BTreeSet<Message> {
    let mut a = BTreeSet::new();
    for v in ["0", "1"] {
        a.insert(Message::input("p", v));
        a.insert(Message::output("q", v));
    }
    a.insert(Message::input("r", "0"));
    a
}

fn table_strategy(depth: usize) -> impl Strategy<Value = EnvTable> {
    let traces: Vec<Trace> = {
        // all traces over the small alphabet up to the depth
        let alphabet = small_alphabet();
        let mut out = vec![Trace::empty()];
        let mut frontier = vec![Trace::empty()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for t in &frontier {
                for m in &alphabet {
                    next.push(t.extended(m.clone()));
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    };
    let inputs: Vec<Message> =
        small_alphabet().into_iter().filter(Message::is_input).collect();
    prop::collection::vec(prop::collection::btree_set(0..inputs.len(), 0..=2), traces.len())
        .prop_map(move |offer_indices| {
            let offers: BTreeMap<Trace, BTreeSet<Message>> = traces
                .iter()
                .cloned()
                .zip(offer_indices.into_iter().map(|set| {
                    set.into_iter().map(|i| inputs[i].clone()).collect::<BTreeSet<_>>()
                }))
                .collect();
            EnvTable::new(depth, offers).unwrap()
        })
}

/// Quantifier-for-quantifier transcription of the erroneous-environment
/// conditions, using trace_equiv directly instead of class grouping.
fn erroneous_pair_direct(
    wf: &EnvTable,
    wc: &EnvTable,
    clause: &NegClause,
    output_event: &EventRef,
    alphabet: &BTreeSet<Message>,
    bound: usize,
) -> bool {
    let rel = Relation::ByClauseAndEvent(clause.clone(), output_event.clone());
    let match_rel = Relation::ByClause(clause.clone());
    let mut traces = vec![Trace::empty()];
    let mut frontier = vec![Trace::empty()];
    for _ in 0..bound {
        let mut next = Vec::new();
        for t in &frontier {
            for m in alphabet {
                next.push(t.extended(m.clone()));
            }
        }
        traces.extend(next.iter().cloned());
        frontier = next;
    }
    for t1 in &traces {
        for t2 in &traces {
            if !trace_equiv(t1, t2, &rel) {
                continue;
            }
            let cond = |offered: &BTreeSet<Message>, other: &BTreeSet<Message>| {
                offered.iter().all(|m| {
                    msg_irrelevant(m, &rel)
                        || other.iter().any(|o| msg_equiv(Some(m), Some(o), &match_rel))
                })
            };
            if !cond(&wc.offers(t1), &wf.offers(t2)) {
                return false;
            }
            if !cond(&wf.offers(t2), &wc.offers(t1)) {
                return false;
            }
        }
    }
    true
}

proptest! {
    #[test]
    fn formula_display_reparses_to_the_same_tree(f in formula_strategy()) {
        let text = f.to_string();
        prop_assert_eq!(Formula::parse(&text).unwrap(), f);
    }

    #[test]
    fn formula_parser_never_panics(input in "\\PC*") {
        let _ = Formula::parse(&input);
    }

    #[test]
    fn model_parser_never_panics(input in "\\PC*") {
        let _ = cft_core::model::parse_model(&input);
    }

    #[test]
    fn model_parser_never_panics_on_near_misses(
        input in "(component|cft|system|in|out|init|[a-z]{1,3}|[0-9]|[{};:,.?!&|()]|--|-->|->|:=| |\n){0,40}",
    ) {
        let _ = cft_core::model::parse_model(&input);
    }
}

/// Generated components and trees survive a serialize/parse round trip:
/// one pass normalizes away unreferenced states (the format declares states
/// implicitly), after which serialization is a fixed point and everything
/// behavioral is preserved.
#[test]
fn generated_models_round_trip() {
    use cft_core::harness::{gen_cft, gen_component, GenParams};
    use cft_core::model::{parse_model, Model};
    let params = GenParams::default();
    for seed in 0..60u64 {
        let comp = gen_component(seed, &format!("comp{seed}"), &params);
        let mut model = Model::default();
        if let Ok(cft) = gen_cft(seed, &comp) {
            model.cfts.insert(format!("tree{seed}"), cft);
        }
        model.components.insert(comp.name().to_string(), comp.clone());
        let reparsed = parse_model(&model.to_text()).unwrap();

        let comp2 = &reparsed.components[comp.name()];
        assert_eq!(comp.ports(), comp2.ports(), "seed {seed}");
        assert_eq!(comp.initial(), comp2.initial(), "seed {seed}");
        assert_eq!(
            comp.transitions().collect::<Vec<_>>(),
            comp2.transitions().collect::<Vec<_>>(),
            "seed {seed}"
        );
        assert_eq!(model.cfts, reparsed.cfts, "seed {seed}");

        // after normalization the round trip is exact
        let again = parse_model(&reparsed.to_text()).unwrap();
        assert_eq!(reparsed, again, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn erroneous_pair_matches_direct_transcription_and_swaps(
        wf in table_strategy(1),
        wc in table_strategy(1),
        clause in clause_strategy(),
    ) {
        let output_event = EventRef::value("q");
        let rel = Relation::ByClauseAndEvent(clause.clone(), output_event.clone());
        let alphabet = small_alphabet();
        let fast = envs_erroneous_pair(&wf, &wc, &rel, &alphabet, 1).unwrap();
        let direct = erroneous_pair_direct(&wf, &wc, &clause, &output_event, &alphabet, 1);
        prop_assert_eq!(fast, direct);
        // swapping the tables swaps the two conditions, leaving the verdict
        let swapped = envs_erroneous_pair(&wc, &wf, &rel, &alphabet, 1).unwrap();
        prop_assert_eq!(fast, swapped);
    }
}
