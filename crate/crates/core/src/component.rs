//! Finite input/output labeled transition systems: messages, traces,
//! determinism validation, trace acceptance, and synchronous composition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::environment::EnvTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::In => write!(f, "in"),
            Direction::Out => write!(f, "out"),
        }
    }
}

/// A named, direction-annotated port with a finite ordered value domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub domain: Vec<String>,
}

/// A directed port-value communication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub port: String,
    pub value: String,
    pub direction: Direction,
}

impl Message {
    pub fn input(port: impl Into<String>, value: impl Into<String>) -> Self {
        Message { port: port.into(), value: value.into(), direction: Direction::In }
    }

    pub fn output(port: impl Into<String>, value: impl Into<String>) -> Self {
        Message { port: port.into(), value: value.into(), direction: Direction::Out }
    }

    pub fn is_input(&self) -> bool {
        self.direction == Direction::In
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = match self.direction {
            Direction::In => '?',
            Direction::Out => '!',
        };
        write!(f, "{}{}{}", self.port, sep, self.value)
    }
}

/// A finite sequence of messages.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace(pub Vec<Message>);

impl Trace {
    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.0.iter()
    }

    pub fn prefix(&self, len: usize) -> Trace {
        Trace(self.0[..len].to_vec())
    }

    pub fn extended(&self, m: Message) -> Trace {
        let mut v = self.0.clone();
        v.push(m);
        Trace(v)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "-");
        }
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

/// Which determinism condition a state violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminismCondition {
    /// Some value of a port is accepted at the state but another is not.
    InputEnabledPerPort,
    /// More than one message is enabled and not all of them are inputs.
    SoloOutput,
    /// A (state, message) pair has more than one successor.
    UniqueSuccessor,
}

impl fmt::Display for DeterminismCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeterminismCondition::InputEnabledPerPort => write!(f, "cond-1"),
            DeterminismCondition::SoloOutput => write!(f, "cond-2"),
            DeterminismCondition::UniqueSuccessor => write!(f, "cond-3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub state: String,
    pub condition: DeterminismCondition,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.condition, self.state, self.detail)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComponentError {
    #[error("duplicate port name '{0}'")]
    DuplicatePort(String),
    #[error("port '{0}' has an empty domain")]
    EmptyDomain(String),
    #[error("port '{0}' has duplicate domain value '{1}'")]
    DuplicateDomainValue(String, String),
    #[error("initial state '{0}' is not a declared state")]
    UnknownInitial(String),
    #[error("transition references unknown state '{0}'")]
    UnknownState(String),
    #[error("message {0} does not match any port declaration")]
    InvalidMessage(Message),
    #[error("environment bound exceeded: input at depth {depth} but table depth is {table_depth}")]
    EnvironmentBoundExceeded { depth: usize, table_depth: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConnectionError {
    #[error("connection mismatch on '{port}': {reason}")]
    Mismatch { port: String, reason: String },
    #[error("unconnected port '{0}' is declared by both components")]
    AmbiguousPort(String),
    #[error("component '{name}' is not deterministic: {first}")]
    NotDeterministic { name: String, first: String },
}

/// A finite IOLTS with declared ports and value domains.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    name: String,
    ports: Vec<PortDecl>,
    states: BTreeSet<String>,
    initial: String,
    transitions: BTreeSet<(String, Message, String)>,
    // successor index, built once
    succ: BTreeMap<(String, Message), Vec<String>>,
}

impl Component {
    pub fn new(
        name: impl Into<String>,
        ports: Vec<PortDecl>,
        states: impl IntoIterator<Item = String>,
        initial: impl Into<String>,
        transitions: impl IntoIterator<Item = (String, Message, String)>,
    ) -> Result<Self, ComponentError> {
        let name = name.into();
        let initial = initial.into();
        let mut seen = BTreeSet::new();
        for p in &ports {
            if !seen.insert(p.name.clone()) {
                return Err(ComponentError::DuplicatePort(p.name.clone()));
            }
            if p.domain.is_empty() {
                return Err(ComponentError::EmptyDomain(p.name.clone()));
            }
            let mut values = BTreeSet::new();
            for v in &p.domain {
                if !values.insert(v.clone()) {
                    return Err(ComponentError::DuplicateDomainValue(p.name.clone(), v.clone()));
                }
            }
        }
        let mut states: BTreeSet<String> = states.into_iter().collect();
        states.insert(initial.clone());
        let transitions: BTreeSet<(String, Message, String)> = transitions.into_iter().collect();
        for (from, m, to) in &transitions {
            for s in [from, to] {
                if !states.contains(s) {
                    return Err(ComponentError::UnknownState(s.clone()));
                }
            }
            let ok = ports.iter().any(|p| {
                p.name == m.port && p.direction == m.direction && p.domain.contains(&m.value)
            });
            if !ok {
                return Err(ComponentError::InvalidMessage(m.clone()));
            }
        }
        let mut succ: BTreeMap<(String, Message), Vec<String>> = BTreeMap::new();
        for (from, m, to) in &transitions {
            succ.entry((from.clone(), m.clone())).or_default().push(to.clone());
        }
        Ok(Component { name, ports, states, initial, transitions, succ })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ports(&self) -> &[PortDecl] {
        &self.ports
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn states(&self) -> impl Iterator<Item = &str> {
        self.states.iter().map(|s| s.as_str())
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn transitions(&self) -> impl Iterator<Item = &(String, Message, String)> {
        self.transitions.iter()
    }

    pub fn input_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::In)
    }

    pub fn output_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::Out)
    }

    /// Every declaration-valid message, in canonical order.
    pub fn alphabet(&self) -> BTreeSet<Message> {
        self.ports
            .iter()
            .flat_map(|p| {
                p.domain.iter().map(|v| Message {
                    port: p.name.clone(),
                    value: v.clone(),
                    direction: p.direction,
                })
            })
            .collect()
    }

    /// Input subset of [`Component::alphabet`].
    pub fn input_alphabet(&self) -> BTreeSet<Message> {
        self.alphabet().into_iter().filter(Message::is_input).collect()
    }

    fn successors(&self, state: &str, m: &Message) -> &[String] {
        self.succ
            .get(&(state.to_string(), m.clone()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Messages enabled at a state, canonical order.
    pub fn enabled(&self, state: &str) -> BTreeSet<Message> {
        self.transitions
            .iter()
            .filter(|(from, _, _)| from == state)
            .map(|(_, m, _)| m.clone())
            .collect()
    }

    /// States reachable from the initial state.
    pub fn reachable_states(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::from([self.initial.clone()]);
        let mut queue = VecDeque::from([self.initial.clone()]);
        while let Some(s) = queue.pop_front() {
            for (from, _, to) in &self.transitions {
                if *from == s && seen.insert(to.clone()) {
                    queue.push_back(to.clone());
                }
            }
        }
        seen
    }

    /// Checks the three determinism conditions at every reachable state:
    /// per-port input-enabledness, solo outputs, and unique successors.
    pub fn validate_deterministic(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for state in self.reachable_states() {
            let enabled = self.enabled(&state);
            // condition 1: if some p?v is enabled, every p?v' must be
            for p in self.input_ports() {
                let enabled_values: BTreeSet<&String> = enabled
                    .iter()
                    .filter(|m| m.port == p.name && m.is_input())
                    .map(|m| &m.value)
                    .collect();
                if !enabled_values.is_empty() && enabled_values.len() != p.domain.len() {
                    let missing: Vec<&String> =
                        p.domain.iter().filter(|v| !enabled_values.contains(v)).collect();
                    violations.push(Violation {
                        state: state.clone(),
                        condition: DeterminismCondition::InputEnabledPerPort,
                        detail: format!(
                            "port '{}' accepts some values but not {:?}",
                            p.name, missing
                        ),
                    });
                }
            }
            // condition 2: two distinct enabled messages force all-inputs
            if enabled.len() > 1 && enabled.iter().any(|m| !m.is_input()) {
                let outputs: Vec<String> = enabled
                    .iter()
                    .filter(|m| !m.is_input())
                    .map(ToString::to_string)
                    .collect();
                violations.push(Violation {
                    state: state.clone(),
                    condition: DeterminismCondition::SoloOutput,
                    detail: format!(
                        "output {} enabled alongside other messages",
                        outputs.join(", ")
                    ),
                });
            }
            // condition 3: unique successor per (state, message)
            for m in &enabled {
                let succs = self.successors(&state, m);
                if succs.len() > 1 {
                    violations.push(Violation {
                        state: state.clone(),
                        condition: DeterminismCondition::UniqueSuccessor,
                        detail: format!("{m} has {} successors", succs.len()),
                    });
                }
            }
        }
        violations
    }

    /// The unique successor of `state` under `m`, if any.
    ///
    /// Panics if the successor is not unique; callers are expected to have
    /// validated determinism first.
    pub fn step(&self, state: &str, m: &Message) -> Option<&str> {
        let succs = self.successors(state, m);
        match succs {
            [] => None,
            [only] => Some(only),
            _ => panic!(
                "internal error: non-deterministic successor set for {m} at {state} in '{}'",
                self.name
            ),
        }
    }

    /// Set-based simulation step, total on non-deterministic components.
    fn step_set(&self, states: &BTreeSet<String>, m: &Message) -> BTreeSet<String> {
        states
            .iter()
            .flat_map(|s| self.successors(s, m).iter().cloned())
            .collect()
    }

    /// True iff the component can communicate the whole trace from its
    /// initial state.
    pub fn accepts_trace(&self, t: &Trace) -> bool {
        let mut frontier = BTreeSet::from([self.initial.clone()]);
        for m in t.iter() {
            frontier = self.step_set(&frontier, m);
            if frontier.is_empty() {
                return false;
            }
        }
        true
    }

    /// All accepted traces of length at most `depth`.
    pub fn traces_up_to(&self, depth: usize) -> BTreeSet<Trace> {
        let mut out = BTreeSet::from([Trace::empty()]);
        let mut frontier: Vec<(Trace, BTreeSet<String>)> =
            vec![(Trace::empty(), BTreeSet::from([self.initial.clone()]))];
        let alphabet = self.alphabet();
        for _ in 0..depth {
            let mut next = Vec::new();
            for (t, states) in &frontier {
                for m in &alphabet {
                    let succ = self.step_set(states, m);
                    if !succ.is_empty() {
                        let ext = t.extended(m.clone());
                        out.insert(ext.clone());
                        next.push((ext, succ));
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// True iff the component accepts `t` and every input in `t` is offered
    /// by `env` at the preceding prefix.
    ///
    /// Errors if some input occurs after a prefix longer than the table's
    /// depth bound: the finite table does not represent offers there.
    pub fn accepts_under_env(&self, env: &EnvTable, t: &Trace) -> Result<bool, ComponentError> {
        for (i, m) in t.iter().enumerate() {
            if m.is_input() && i > env.depth() {
                return Err(ComponentError::EnvironmentBoundExceeded {
                    depth: i,
                    table_depth: env.depth(),
                });
            }
        }
        if !self.accepts_trace(t) {
            return Ok(false);
        }
        for (i, m) in t.iter().enumerate() {
            if m.is_input() && !env.offers(&t.prefix(i)).contains(m) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Synchronous product of two components over the given connection ports.
///
/// Each connection port must be an input of `c` and an output of `d` with an
/// identical domain. On a connected port, `d`'s output and `c`'s input fire
/// together and surface as a single output of the composite; if the receiver
/// is not ready the send blocks. Messages on unconnected ports interleave
/// freely. Composite ports are all unconnected ports of both sides plus the
/// connected ports re-declared as outputs.
pub fn compose_components(
    c: &Component,
    d: &Component,
    connections: &[String],
) -> Result<Component, ConnectionError> {
    for comp in [c, d] {
        let violations = comp.validate_deterministic();
        if let Some(first) = violations.first() {
            return Err(ConnectionError::NotDeterministic {
                name: comp.name.clone(),
                first: first.to_string(),
            });
        }
    }
    let connected: BTreeSet<&String> = connections.iter().collect();
    for port in connections {
        let cp = c.port(port).ok_or_else(|| ConnectionError::Mismatch {
            port: port.clone(),
            reason: format!("not declared by '{}'", c.name),
        })?;
        let dp = d.port(port).ok_or_else(|| ConnectionError::Mismatch {
            port: port.clone(),
            reason: format!("not declared by '{}'", d.name),
        })?;
        if cp.direction != Direction::In {
            return Err(ConnectionError::Mismatch {
                port: port.clone(),
                reason: format!("not an input of '{}'", c.name),
            });
        }
        if dp.direction != Direction::Out {
            return Err(ConnectionError::Mismatch {
                port: port.clone(),
                reason: format!("not an output of '{}'", d.name),
            });
        }
        if cp.domain != dp.domain {
            return Err(ConnectionError::Mismatch {
                port: port.clone(),
                reason: "value domains differ".to_string(),
            });
        }
    }

    let mut ports: Vec<PortDecl> = Vec::new();
    for p in &c.ports {
        if connected.contains(&p.name) {
            ports.push(PortDecl {
                name: p.name.clone(),
                direction: Direction::Out,
                domain: p.domain.clone(),
            });
        } else {
            ports.push(p.clone());
        }
    }
    for p in &d.ports {
        if connected.contains(&p.name) {
            continue; // declared above, as an output
        }
        if c.port(&p.name).is_some() {
            return Err(ConnectionError::AmbiguousPort(p.name.clone()));
        }
        ports.push(p.clone());
    }

    let pair_name = |cs: &str, ds: &str| format!("{cs}__{ds}");
    let name = format!("{}_{}", c.name, d.name);
    let initial = pair_name(&c.initial, &d.initial);

    // explore reachable product states only
    let mut states = BTreeSet::from([initial.clone()]);
    let mut transitions: BTreeSet<(String, Message, String)> = BTreeSet::new();
    let mut queue = VecDeque::from([(c.initial.clone(), d.initial.clone())]);
    let mut seen = BTreeSet::from([(c.initial.clone(), d.initial.clone())]);
    while let Some((cs, ds)) = queue.pop_front() {
        let from = pair_name(&cs, &ds);
        let mut push = |m: Message, cs2: String, ds2: String, transitions: &mut BTreeSet<_>| {
            let to = pair_name(&cs2, &ds2);
            states.insert(to.clone());
            transitions.insert((from.clone(), m, to));
            if seen.insert((cs2.clone(), ds2.clone())) {
                queue.push_back((cs2, ds2));
            }
        };
        for m in c.enabled(&cs) {
            if connected.contains(&m.port) {
                continue; // fires only via the handshake below
            }
            let cs2 = c.step(&cs, &m).expect("enabled").to_string();
            push(m, cs2, ds.clone(), &mut transitions);
        }
        for m in d.enabled(&ds) {
            let ds2 = d.step(&ds, &m).expect("enabled").to_string();
            if connected.contains(&m.port) {
                // handshake: c must receive the same port/value
                let recv = Message::input(m.port.clone(), m.value.clone());
                if let Some(cs2) = c.step(&cs, &recv) {
                    push(m, cs2.to_string(), ds2, &mut transitions);
                }
                // otherwise the send blocks
            } else {
                push(m, cs.clone(), ds2, &mut transitions);
            }
        }
    }

    Component::new(name, ports, states, initial, transitions)
        .map_err(|e| ConnectionError::Mismatch { port: String::new(), reason: e.to_string() })
}


#[cfg(test)]
mod tests {
    use super::fixtures::{constant_emitter, echo};
    use super::*;

    fn two_valued(name: &str, dir: Direction) -> PortDecl {
        PortDecl { name: name.into(), direction: dir, domain: vec!["0".into(), "1".into()] }
    }

    #[test]
    fn deterministic_component_passes() {
        let comp = Component::new(
            "ok",
            vec![two_valued("p", Direction::In)],
            ["s0".to_string(), "s1".to_string(), "s2".to_string()],
            "s0",
            [
                ("s0".into(), Message::input("p", "0"), "s1".into()),
                ("s0".into(), Message::input("p", "1"), "s2".into()),
            ],
        )
        .unwrap();
        assert_eq!(comp.validate_deterministic(), vec![]);
    }

    #[test]
    fn partial_input_coverage_violates_condition_1() {
        let comp = Component::new(
            "partial",
            vec![two_valued("p", Direction::In)],
            ["s0".to_string(), "s1".to_string()],
            "s0",
            [("s0".into(), Message::input("p", "0"), "s1".into())],
        )
        .unwrap();
        let violations = comp.validate_deterministic();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].condition, DeterminismCondition::InputEnabledPerPort);
        assert_eq!(violations[0].state, "s0");
    }

    #[test]
    fn two_outputs_violate_condition_2() {
        let comp = Component::new(
            "two_out",
            vec![two_valued("q", Direction::Out)],
            ["s0".to_string(), "s1".to_string(), "s2".to_string()],
            "s0",
            [
                ("s0".into(), Message::output("q", "0"), "s1".into()),
                ("s0".into(), Message::output("q", "1"), "s2".into()),
            ],
        )
        .unwrap();
        let violations = comp.validate_deterministic();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].condition, DeterminismCondition::SoloOutput);
        assert_eq!(violations[0].state, "s0");
    }

    #[test]
    fn duplicate_successor_violates_condition_3() {
        let comp = Component::new(
            "dup",
            vec![two_valued("q", Direction::Out)],
            ["s0".to_string(), "s1".to_string(), "s2".to_string()],
            "s0",
            [
                ("s0".into(), Message::output("q", "0"), "s1".into()),
                ("s0".into(), Message::output("q", "0"), "s2".into()),
            ],
        )
        .unwrap();
        let violations = comp.validate_deterministic();
        assert!(violations
            .iter()
            .any(|v| v.condition == DeterminismCondition::UniqueSuccessor));
    }

    #[test]
    fn unreachable_states_are_not_validated() {
        let comp = Component::new(
            "island",
            vec![two_valued("p", Direction::In), two_valued("q", Direction::Out)],
            ["s0".to_string(), "dead".to_string(), "x".to_string(), "y".to_string()],
            "s0",
            [
                // unreachable 'dead' violates everything, but it never runs
                ("dead".into(), Message::output("q", "0"), "x".into()),
                ("dead".into(), Message::output("q", "1"), "y".into()),
            ],
        )
        .unwrap();
        assert_eq!(comp.validate_deterministic(), vec![]);
    }

    #[test]
    fn step_examples() {
        let e = echo();
        assert_eq!(e.step("s0", &Message::input("p", "1")), Some("s_1"));
        assert_eq!(e.step("s0", &Message::output("q", "0")), None);
        assert_eq!(e.step("s_1", &Message::output("q", "1")), Some("s0"));
    }

    #[test]
    fn accepts_trace_examples() {
        let e = echo();
        assert!(e.accepts_trace(&Trace::empty()));
        assert!(e.accepts_trace(&Trace(vec![Message::input("p", "1"), Message::output("q", "1")])));
        assert!(!e.accepts_trace(&Trace(vec![Message::output("q", "1")])));
    }

    #[test]
    fn prefix_closure_of_acceptance() {
        let e = echo();
        for t in e.traces_up_to(4) {
            for k in 0..=t.len() {
                assert!(e.accepts_trace(&t.prefix(k)));
            }
        }
    }

    #[test]
    fn traces_up_to_examples() {
        let e = echo();
        assert_eq!(e.traces_up_to(0), BTreeSet::from([Trace::empty()]));

        let depth1 = e.traces_up_to(1);
        let expected1 = BTreeSet::from([
            Trace::empty(),
            Trace(vec![Message::input("p", "0")]),
            Trace(vec![Message::input("p", "1")]),
        ]);
        assert_eq!(depth1, expected1);

        let depth2 = e.traces_up_to(2);
        let mut expected2 = expected1.clone();
        expected2.insert(Trace(vec![Message::input("p", "0"), Message::output("q", "0")]));
        expected2.insert(Trace(vec![Message::input("p", "1"), Message::output("q", "1")]));
        assert_eq!(depth2, expected2);

        // monotone in depth
        assert!(depth1.is_subset(&depth2));
        assert!(depth2.is_subset(&e.traces_up_to(3)));
    }

    #[test]
    fn accepts_under_env_examples() {
        let e = echo();
        let empty = EnvTable::new(2, BTreeMap::new()).unwrap();
        assert_eq!(e.accepts_under_env(&empty, &Trace::empty()), Ok(true));

        let offers_p1 = EnvTable::new(
            2,
            BTreeMap::from([(
                Trace::empty(),
                BTreeSet::from([Message::input("p", "1")]),
            )]),
        )
        .unwrap();
        let t_p0 = Trace(vec![Message::input("p", "0"), Message::output("q", "0")]);
        let t_p1 = Trace(vec![Message::input("p", "1"), Message::output("q", "1")]);
        assert_eq!(e.accepts_under_env(&offers_p1, &t_p0), Ok(false));
        assert_eq!(e.accepts_under_env(&offers_p1, &t_p1), Ok(true));

        // under-env acceptance implies plain acceptance
        for t in e.traces_up_to(3) {
            if e.accepts_under_env(&offers_p1, &t) == Ok(true) {
                assert!(e.accepts_trace(&t));
            }
        }
    }

    #[test]
    fn accepts_under_env_bound_exceeded() {
        let e = echo();
        let shallow = EnvTable::new(0, BTreeMap::new()).unwrap();
        let t = Trace(vec![
            Message::input("p", "1"),
            Message::output("q", "1"),
            Message::input("p", "0"),
        ]);
        assert_eq!(
            e.accepts_under_env(&shallow, &t),
            Err(ComponentError::EnvironmentBoundExceeded { depth: 2, table_depth: 0 })
        );
    }

    #[test]
    fn compose_emitter_with_echo() {
        let c = echo();
        let d = constant_emitter();
        let composite = compose_components(&c, &d, &["p".to_string()]).unwrap();

        // connected port re-declared as output
        assert_eq!(composite.port("p").unwrap().direction, Direction::Out);
        assert_eq!(composite.port("u").unwrap().direction, Direction::In);
        assert_eq!(composite.port("q").unwrap().direction, Direction::Out);

        // product construction by hand: sync p!1, then echo answers q!1
        let t = Trace(vec![Message::output("p", "1"), Message::output("q", "1")]);
        assert!(composite.accepts_trace(&t));
        // p!0 is never sent by the emitter
        assert!(!composite.accepts_trace(&Trace(vec![Message::output("p", "0")])));
        // while echo holds the pending answer, the emitter blocks
        assert!(!composite.accepts_trace(&Trace(vec![
            Message::output("p", "1"),
            Message::output("p", "1"),
        ])));
        assert_eq!(composite.validate_deterministic(), vec![]);
    }

    #[test]
    fn compose_without_connections_interleaves() {
        let c = echo();
        let d = Component::new(
            "inert",
            vec![two_valued("u", Direction::In)],
            ["d0".to_string()],
            "d0",
            [],
        )
        .unwrap();
        let composite = compose_components(&c, &d, &[]).unwrap();
        // disjoint interleaving: echo side runs undisturbed
        assert!(composite
            .accepts_trace(&Trace(vec![Message::input("p", "1"), Message::output("q", "1")])));
        assert_eq!(composite.port("p").unwrap().direction, Direction::In);
    }

    #[test]
    fn compose_rejects_direction_mismatch() {
        let c = echo();
        let d = constant_emitter();
        // q is an output of c, not an input: invalid connection
        let err = compose_components(&c, &d, &["q".to_string()]).unwrap_err();
        assert!(matches!(err, ConnectionError::Mismatch { .. }));
    }

    #[test]
    fn compose_rejects_domain_mismatch() {
        let c = echo();
        let d = Component::new(
            "wide",
            vec![PortDecl {
                name: "p".into(),
                direction: Direction::Out,
                domain: vec!["0".into(), "1".into(), "2".into()],
            }],
            ["d0".to_string()],
            "d0",
            [],
        )
        .unwrap();
        let err = compose_components(&c, &d, &["p".to_string()]).unwrap_err();
        assert!(matches!(err, ConnectionError::Mismatch { .. }));
    }

    #[test]
    fn compose_rejects_nondeterministic_operand() {
        let c = echo();
        let bad = Component::new(
            "bad",
            vec![two_valued("p", Direction::Out)],
            ["s0".to_string(), "s1".to_string(), "s2".to_string()],
            "s0",
            [
                ("s0".into(), Message::output("p", "0"), "s1".into()),
                ("s0".into(), Message::output("p", "1"), "s2".into()),
            ],
        )
        .unwrap();
        let err = compose_components(&c, &bad, &["p".to_string()]).unwrap_err();
        assert!(matches!(err, ConnectionError::NotDeterministic { .. }));
    }
}
