//! Component fault trees and their two composition operators.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::component::{Component, Direction};
use crate::formula::{EventRef, Formula, NegClause};

/// A fault-tree for one output event of a component: the formula states
/// which combinations of input-event failures can raise the output failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cft {
    pub formula: Formula,
    pub output_event: EventRef,
    pub owner: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CftError {
    #[error("output event port '{0}' is not an output port of '{1}'")]
    OutputPortInvalid(String, String),
    #[error("formula literal port '{0}' is not an input port of '{1}'")]
    LiteralPortInvalid(String, String),
    #[error("binding mismatch: bound tree for {key} has output event {actual}")]
    BindingMismatch { key: EventRef, actual: EventRef },
    #[error("unbound connected event {0} in formula")]
    UnboundConnectedEvent(EventRef),
}

impl Cft {
    /// Validates the tree against its owner: the output event must sit on an
    /// output port, every formula literal on an input port.
    pub fn new(formula: Formula, output_event: EventRef, owner: &Component) -> Result<Self, CftError> {
        match owner.port(&output_event.port) {
            Some(p) if p.direction == Direction::Out => {}
            _ => {
                return Err(CftError::OutputPortInvalid(
                    output_event.port.clone(),
                    owner.name().to_string(),
                ))
            }
        }
        for event in formula.events() {
            match owner.port(&event.port) {
                Some(p) if p.direction == Direction::In => {}
                _ => {
                    return Err(CftError::LiteralPortInvalid(
                        event.port,
                        owner.name().to_string(),
                    ))
                }
            }
        }
        Ok(Cft { formula, output_event, owner: owner.name().to_string() })
    }

    /// Constructs without the port-direction checks. Composition results
    /// need this: a strictly composed formula keeps events on connected
    /// ports, which are outputs of the composite, and checks against one
    /// operand alone reference ports foreign to it.
    pub fn new_unchecked(formula: Formula, output_event: EventRef, owner: impl Into<String>) -> Self {
        Cft { formula, output_event, owner: owner.into() }
    }

    /// The clause decomposition of the negated formula.
    pub fn clauses(&self) -> Vec<NegClause> {
        self.formula.neg_dnf()
    }
}

impl fmt::Display for Cft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}) on {}", self.formula, self.output_event, self.owner)
    }
}

/// Maps connected input events of the consuming component to the producing
/// component's trees for those events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding {
    entries: BTreeMap<EventRef, Cft>,
}

impl Binding {
    pub fn new(entries: impl IntoIterator<Item = (EventRef, Cft)>) -> Result<Self, CftError> {
        let entries: BTreeMap<EventRef, Cft> = entries.into_iter().collect();
        for (key, cft) in &entries {
            if &cft.output_event != key {
                return Err(CftError::BindingMismatch {
                    key: key.clone(),
                    actual: cft.output_event.clone(),
                });
            }
        }
        Ok(Binding { entries })
    }

    pub fn empty() -> Self {
        Binding::default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&EventRef, &Cft)> {
        self.entries.iter()
    }

    pub fn get(&self, event: &EventRef) -> Option<&Cft> {
        self.entries.get(event)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ports carrying at least one bound event.
    pub fn connected_ports(&self) -> Vec<&str> {
        let mut ports: Vec<&str> = self.entries.keys().map(|e| e.port.as_str()).collect();
        ports.dedup();
        ports
    }
}

fn composite_owner(cft_c: &Cft, binding: &Binding) -> String {
    match binding.entries().next() {
        Some((_, bound)) => format!("{}_{}", cft_c.owner, bound.owner),
        None => cft_c.owner.clone(),
    }
}

/// Every formula event on a connected port must have a binding entry;
/// otherwise the composed formula would mention an event that is no longer
/// an environment-facing input.
fn check_fully_bound(cft_c: &Cft, binding: &Binding) -> Result<(), CftError> {
    let connected: Vec<&str> = binding.connected_ports();
    for event in cft_c.formula.events() {
        if connected.contains(&event.port.as_str()) && binding.get(&event).is_none() {
            return Err(CftError::UnboundConnectedEvent(event));
        }
    }
    Ok(())
}

/// Fault-tree composition: each bound event in the consumer's formula is
/// replaced by the producer's formula for it. The output event is unchanged;
/// the owner becomes the composite component.
pub fn compose(cft_c: &Cft, binding: &Binding) -> Result<Cft, CftError> {
    check_fully_bound(cft_c, binding)?;
    let mut formula = cft_c.formula.clone();
    for (event, bound) in binding.entries() {
        formula = formula.substitute(event, &bound.formula);
    }
    Ok(Cft::new_unchecked(formula, cft_c.output_event.clone(), composite_owner(cft_c, binding)))
}

/// Strict composition: each bound event is kept and conjoined with the
/// producer's formula for it.
pub fn compose_strict(cft_c: &Cft, binding: &Binding) -> Result<Cft, CftError> {
    check_fully_bound(cft_c, binding)?;
    let mut formula = cft_c.formula.clone();
    for (event, bound) in binding.entries() {
        formula = formula.substitute_strict(event, &bound.formula);
    }
    Ok(Cft::new_unchecked(formula, cft_c.output_event.clone(), composite_owner(cft_c, binding)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::component::fixtures::echo;
    use crate::formula::{formulas_equiv, for_each_assignment};

    fn lit(port: &str) -> Formula {
        Formula::Literal(EventRef::value(port))
    }

    fn bound_cft(formula: Formula, event: EventRef) -> Cft {
        Cft::new_unchecked(formula, event, "d")
    }

    fn binding_for(entries: Vec<(EventRef, Formula)>) -> Binding {
        Binding::new(
            entries
                .into_iter()
                .map(|(e, f)| (e.clone(), bound_cft(f, e)))
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn plain(formula: Formula) -> Cft {
        Cft::new_unchecked(formula, EventRef::value("e"), "c")
    }

    #[test]
    fn cft_validation_against_owner() {
        let e = echo();
        assert!(Cft::new(lit("p"), EventRef::value("q"), &e).is_ok());
        // q is an output port, not allowed as a literal
        assert!(matches!(
            Cft::new(lit("q"), EventRef::value("q"), &e),
            Err(CftError::LiteralPortInvalid(..))
        ));
        // p is an input port, not allowed as the output event
        assert!(matches!(
            Cft::new(lit("p"), EventRef::value("p"), &e),
            Err(CftError::OutputPortInvalid(..))
        ));
    }

    #[test]
    fn binding_rejects_output_event_mismatch() {
        let err = Binding::new([(
            EventRef::value("a2"),
            bound_cft(lit("b1"), EventRef::value("other")),
        )])
        .unwrap_err();
        assert!(matches!(err, CftError::BindingMismatch { .. }));
    }

    #[test]
    fn compose_examples() {
        let a2 = EventRef::value("a2");
        let cft_c = plain(Formula::or(vec![lit("a1"), lit("a2")]));
        let b = binding_for(vec![(a2.clone(), Formula::and(vec![lit("b1"), lit("b2")]))]);
        let composed = compose(&cft_c, &b).unwrap();
        assert_eq!(
            composed.formula,
            Formula::or(vec![lit("a1"), Formula::and(vec![lit("b1"), lit("b2")])])
        );
        assert_eq!(composed.output_event, cft_c.output_event);
        assert_eq!(composed.owner, "c_d");

        let unchanged = compose(&cft_c, &Binding::empty()).unwrap();
        assert_eq!(unchanged.formula, cft_c.formula);
        assert_eq!(unchanged.owner, "c");

        let single = plain(lit("a2"));
        let b2 = binding_for(vec![(a2, lit("b1"))]);
        assert_eq!(compose(&single, &b2).unwrap().formula, lit("b1"));
    }

    #[test]
    fn compose_strict_examples() {
        let a2 = EventRef::value("a2");
        let cft_c = plain(Formula::or(vec![lit("a1"), lit("a2")]));
        let b = binding_for(vec![(a2.clone(), lit("b1"))]);
        let composed = compose_strict(&cft_c, &b).unwrap();
        assert_eq!(
            composed.formula,
            Formula::or(vec![lit("a1"), Formula::and(vec![lit("a2"), lit("b1")])])
        );

        let unchanged = compose_strict(&cft_c, &Binding::empty()).unwrap();
        assert_eq!(unchanged.formula, cft_c.formula);

        let a3 = EventRef::value("a3");
        let two = plain(Formula::and(vec![lit("a2"), lit("a3")]));
        let b2 = binding_for(vec![(a2.clone(), lit("b1")), (a3.clone(), lit("b2"))]);
        assert_eq!(
            compose_strict(&two, &b2).unwrap().formula,
            Formula::and(vec![
                Formula::and(vec![lit("a2"), lit("b1")]),
                Formula::and(vec![lit("a3"), lit("b2")]),
            ])
        );
    }

    #[test]
    fn compose_rejects_unbound_connected_event() {
        // a2 is bound on port a2, so the exists-event on the same port is
        // connected but unbound
        let cft_c = plain(Formula::or(vec![
            Formula::Literal(EventRef::exists("a2")),
            lit("a2"),
        ]));
        let b = binding_for(vec![(EventRef::value("a2"), lit("b1"))]);
        assert!(matches!(
            compose(&cft_c, &b),
            Err(CftError::UnboundConnectedEvent(e)) if e == EventRef::exists("a2")
        ));
    }

    #[test]
    fn clauses_delegate_to_neg_dnf() {
        let cft = plain(Formula::or(vec![lit("a1"), Formula::and(vec![lit("a2"), lit("a3")])]));
        assert_eq!(cft.clauses(), cft.formula.neg_dnf());
        assert_eq!(cft.clauses().len(), 2);
    }

    #[test]
    fn strict_and_plain_composition_agree_when_bound_events_track_their_formulas() {
        let a2 = EventRef::value("a2");
        let q = Formula::or(vec![lit("b1"), lit("b2")]);
        let cft_c = plain(Formula::or(vec![lit("a1"), lit("a2")]));
        let b = binding_for(vec![(a2.clone(), q.clone())]);
        let plain_f = compose(&cft_c, &b).unwrap().formula;
        let strict_f = compose_strict(&cft_c, &b).unwrap().formula;

        // not equivalent in general
        assert!(!formulas_equiv(&plain_f, &strict_f));

        // equivalent on assignments where the bound event equals its formula
        let mut events: Vec<EventRef> =
            plain_f.events().union(&strict_f.events()).cloned().collect();
        for e in cft_c.formula.events() {
            if !events.contains(&e) {
                events.push(e);
            }
        }
        assert!(for_each_assignment(&events, |assignment| {
            let constrained =
                assignment[&a2] == q.eval(assignment).unwrap();
            !constrained
                || plain_f.eval(assignment).unwrap() == strict_f.eval(assignment).unwrap()
        }));
    }

    #[test]
    fn strict_result_entails_plain_result_when_bound_event_holds() {
        let a2 = EventRef::value("a2");
        let cft_c = plain(Formula::or(vec![lit("a1"), lit("a2")]));
        let b = binding_for(vec![(a2.clone(), Formula::and(vec![lit("b1"), lit("b2")]))]);
        let plain_f = compose(&cft_c, &b).unwrap().formula;
        let strict_f = compose_strict(&cft_c, &b).unwrap().formula;
        let events: Vec<EventRef> = strict_f
            .events()
            .union(&plain_f.events())
            .cloned()
            .chain([a2.clone()])
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        assert!(for_each_assignment(&events, |assignment| {
            if assignment[&a2] {
                !strict_f.eval(assignment).unwrap() || plain_f.eval(assignment).unwrap()
            } else {
                true
            }
        }));
    }

    #[test]
    fn composition_commutes_with_renaming_unbound_events() {
        // alpha-invariance: renaming a1 -> z1 before or after composing
        // yields the same formula
        let a2 = EventRef::value("a2");
        let rename = |f: &Formula| f.substitute(&EventRef::value("a1"), &lit("z1"));
        let cft_c = plain(Formula::or(vec![lit("a1"), lit("a2")]));
        let b = binding_for(vec![(a2.clone(), lit("b1"))]);

        for op in [compose, compose_strict] {
            let composed_then_renamed = rename(&op(&cft_c, &b).unwrap().formula);
            let renamed_cft = plain(rename(&cft_c.formula));
            let renamed_then_composed = op(&renamed_cft, &b).unwrap().formula;
            assert_eq!(composed_then_renamed, renamed_then_composed);
        }
    }
}
