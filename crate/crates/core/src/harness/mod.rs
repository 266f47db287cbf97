//! Theorem-validation campaigns: compositionality checks on single systems,
//! seeded random system generation, and batch runs.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::cft::{compose, compose_strict, Binding, Cft, CftError};
use crate::checker::{
    check_cft, verify_counterexample, Bounds, CftReport, CheckError, Counterexample,
};
use crate::component::{compose_components, Component, ConnectionError, Direction};
use crate::equivalence::Relation;
use crate::formula::{EventRef, NegClause};

mod gen;

pub use gen::{gen_cft, gen_component, gen_system, GenParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarnessError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Cft(#[from] CftError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error("composite '{name}' is not deterministic: {first}")]
    CompositeNondeterministic { name: String, first: String },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("component has no {0} ports: ungeneratable")]
    Ungeneratable(&'static str),
}

/// Checker bounds with an optional pinned witness depth; when absent, each
/// checked component gets the default headroom for flushing outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundsSpec {
    pub trace_depth: usize,
    pub env_depth: usize,
    pub max_offers: usize,
    pub witness_depth: Option<usize>,
}

impl BoundsSpec {
    /// Campaign defaults: full runs finish in minutes at desk scale.
    pub const CAMPAIGN: BoundsSpec =
        BoundsSpec { trace_depth: 4, env_depth: 3, max_offers: 2, witness_depth: None };

    pub fn for_component(&self, comp: &Component) -> Bounds {
        match self.witness_depth {
            Some(w) => Bounds {
                trace_depth: self.trace_depth,
                env_depth: self.env_depth,
                max_offers: self.max_offers,
                witness_depth: w,
            },
            None => Bounds::with_default_witness(
                self.trace_depth,
                self.env_depth,
                self.max_offers,
                comp.state_count(),
            ),
        }
    }
}

/// A two-component system: `d`'s connected outputs feed `c`'s inputs, the
/// consumer tree `cft_c` is checked, and `binding` supplies `d`'s trees for
/// every connected event the consumer formula mentions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemSpec {
    pub c: Component,
    pub d: Component,
    pub connections: Vec<String>,
    pub cft_c: Cft,
    pub binding: Binding,
    pub bounds: BoundsSpec,
}

impl SystemSpec {
    pub fn new(
        c: Component,
        d: Component,
        connections: Vec<String>,
        cft_c: Cft,
        binding: Binding,
        bounds: BoundsSpec,
    ) -> Result<Self, HarnessError> {
        if cft_c.owner != c.name() {
            return Err(HarnessError::InvalidSystem(format!(
                "checked tree is on '{}', expected '{}'",
                cft_c.owner,
                c.name()
            )));
        }
        for port in &connections {
            let ok = c.port(port).map(|p| p.direction) == Some(Direction::In)
                && d.port(port).map(|p| p.direction) == Some(Direction::Out);
            if !ok {
                return Err(HarnessError::InvalidSystem(format!(
                    "connection '{port}' must be an input of '{}' and an output of '{}'",
                    c.name(),
                    d.name()
                )));
            }
        }
        for (event, bound) in binding.entries() {
            if !connections.contains(&event.port) {
                return Err(HarnessError::InvalidSystem(format!(
                    "bound event {event} is not on a connected port"
                )));
            }
            if bound.owner != d.name() {
                return Err(HarnessError::InvalidSystem(format!(
                    "bound tree for {event} is on '{}', expected '{}'",
                    bound.owner,
                    d.name()
                )));
            }
        }
        for event in cft_c.formula.events() {
            if connections.contains(&event.port) && binding.get(&event).is_none() {
                return Err(HarnessError::InvalidSystem(format!(
                    "connected event {event} mentioned by the checked tree has no binding"
                )));
            }
        }
        Ok(SystemSpec { c, d, connections, cft_c, binding, bounds })
    }

    /// Synchronous product of the two components; errors if the product
    /// breaks determinism (reported, never silently accepted).
    pub fn composite(&self) -> Result<Component, HarnessError> {
        let composite = compose_components(&self.c, &self.d, &self.connections)?;
        let violations = composite.validate_deterministic();
        if let Some(first) = violations.first() {
            return Err(HarnessError::CompositeNondeterministic {
                name: composite.name().to_string(),
                first: first.to_string(),
            });
        }
        Ok(composite)
    }

    pub fn composed_cft(&self) -> Result<Cft, HarnessError> {
        let mut cft = compose(&self.cft_c, &self.binding)?;
        // with an empty binding the composition cannot see d; stamp the
        // composite name the product construction will use
        cft.owner = format!("{}_{}", self.c.name(), self.d.name());
        Ok(cft)
    }

    pub fn strict_composed_cft(&self) -> Result<Cft, HarnessError> {
        let mut cft = compose_strict(&self.cft_c, &self.binding)?;
        cft.owner = format!("{}_{}", self.c.name(), self.d.name());
        Ok(cft)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremStatus {
    PremisesFailed,
    Validated,
    Violation,
}

/// Outcome of one compositionality check: premise verdicts for both
/// components, and (when the premises hold) conclusion verdicts for the
/// composed and strictly composed trees against the composite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremReport {
    pub premise_c: CftReport,
    pub premises_d: Vec<(EventRef, CftReport)>,
    pub conclusion: Option<CftReport>,
    pub strict_conclusion: Option<CftReport>,
    pub status: TheoremStatus,
}

impl TheoremReport {
    pub fn premises_hold(&self) -> bool {
        self.premise_c.all_correct()
            && self.premises_d.iter().all(|(_, r)| r.all_correct())
    }
}

/// Checks the premises on `c` and `d`; if they all hold, judges the composed
/// and strictly composed trees against the composite. `Violation` flags a
/// suite failure: it means correct premises with a refuted conclusion, which
/// indicates an implementation bug or a bound artifact and must ship with
/// full counterexample dumps.
pub fn validate_theorem_instance(spec: &SystemSpec) -> Result<TheoremReport, HarnessError> {
    let premise_c = check_cft(&spec.c, &spec.cft_c, &spec.bounds.for_component(&spec.c))?;
    let mut premises_d = Vec::new();
    for (event, bound) in spec.binding.entries() {
        let report = check_cft(&spec.d, bound, &spec.bounds.for_component(&spec.d))?;
        premises_d.push((event.clone(), report));
    }
    let premises_hold =
        premise_c.all_correct() && premises_d.iter().all(|(_, r)| r.all_correct());
    if !premises_hold {
        return Ok(TheoremReport {
            premise_c,
            premises_d,
            conclusion: None,
            strict_conclusion: None,
            status: TheoremStatus::PremisesFailed,
        });
    }

    let composite = spec.composite()?;
    let bounds = spec.bounds.for_component(&composite);
    let conclusion = check_cft(&composite, &spec.composed_cft()?, &bounds)?;
    let strict_conclusion = check_cft(&composite, &spec.strict_composed_cft()?, &bounds)?;
    // Violation keys on the composed tree's verdict. The strictly composed
    // tree's negated DNF contains clauses that drop a kept connected event
    // (picking the other disjunct of !(A & P)), and those clauses are
    // refutable whenever an irrelevant free input gates the composite's
    // behavior; its verdicts are reported but do not decide the status.
    let status = if conclusion.all_correct() {
        TheoremStatus::Validated
    } else {
        TheoremStatus::Violation
    };
    Ok(TheoremReport {
        premise_c,
        premises_d,
        conclusion: Some(conclusion),
        strict_conclusion: Some(strict_conclusion),
        status,
    })
}

/// One refuted clause of the composed tree, and whether its counterexample
/// re-verifies against some clause of the strictly composed tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferCase {
    pub clause: NegClause,
    pub counterexample: Counterexample,
    pub transferred_to: Option<NegClause>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferReport {
    pub cases: Vec<TransferCase>,
}

impl TransferReport {
    /// True iff every harvested counterexample transferred (vacuously true
    /// with no refuted clauses).
    pub fn holds(&self) -> bool {
        self.cases.iter().all(|c| c.transferred_to.is_some())
    }
}

/// Checks the composed tree against the composite regardless of premises,
/// and re-verifies every counterexample found against the clauses of the
/// strictly composed tree.
pub fn transfer_property(spec: &SystemSpec) -> Result<TransferReport, HarnessError> {
    let composite = spec.composite()?;
    let bounds = spec.bounds.for_component(&composite);
    let composed = spec.composed_cft()?;
    let strict = spec.strict_composed_cft()?;
    let strict_clauses = strict.clauses();
    let report = check_cft(&composite, &composed, &bounds)?;

    let mut cases = Vec::new();
    for (clause, cex) in report.refuted() {
        let transferred_to = strict_clauses
            .iter()
            .find(|strict_clause| {
                let rel = Relation::ByClauseAndEvent(
                    (*strict_clause).clone(),
                    strict.output_event.clone(),
                );
                verify_counterexample(&composite, cex, &rel, &bounds).is_ok()
            })
            .cloned();
        cases.push(TransferCase {
            clause: clause.clone(),
            counterexample: cex.clone(),
            transferred_to,
        });
    }
    Ok(TransferReport { cases })
}

/// How a campaign trial ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrialStatus {
    Validated,
    PremisesFailed,
    Violation,
    /// The synchronous product broke determinism; the instance cannot be
    /// judged and is reported rather than silently dropped.
    CompositeNondeterministic(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub status: TrialStatus,
    pub report: Option<TheoremReport>,
    /// Transfer check over the non-strict conclusion's counterexamples,
    /// run whenever the composite is checkable (premises need not hold).
    pub transfer: Option<TransferReport>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignReport {
    pub trials: Vec<TrialOutcome>,
}

impl CampaignReport {
    pub fn count(&self, f: impl Fn(&TrialStatus) -> bool) -> usize {
        self.trials.iter().filter(|t| f(&t.status)).count()
    }

    pub fn violations(&self) -> usize {
        self.count(|s| matches!(s, TrialStatus::Violation))
    }

    /// Premise-passing trials whose strictly composed tree had a refuted
    /// clause. Tracked separately from violations; see
    /// [`validate_theorem_instance`] on why these arise.
    pub fn strict_refutations(&self) -> usize {
        self.trials
            .iter()
            .filter_map(|t| t.report.as_ref())
            .filter(|r| {
                r.premises_hold()
                    && r.strict_conclusion.as_ref().is_some_and(|s| !s.all_correct())
            })
            .count()
    }

    pub fn transfer_holds(&self) -> bool {
        self.trials
            .iter()
            .filter_map(|t| t.transfer.as_ref())
            .all(TransferReport::holds)
    }
}

/// One seeded trial: generate a system, judge premises and conclusions, and
/// run the counterexample-transfer check.
pub fn run_trial(seed: u64, bounds: BoundsSpec) -> Result<TrialOutcome, HarnessError> {
    let spec = gen_system(seed, bounds);
    let composite = match spec.composite() {
        Ok(composite) => composite,
        Err(HarnessError::CompositeNondeterministic { first, .. }) => {
            return Ok(TrialOutcome {
                seed,
                status: TrialStatus::CompositeNondeterministic(first),
                report: None,
                transfer: None,
            })
        }
        Err(e) => return Err(e),
    };
    drop(composite);
    let report = validate_theorem_instance(&spec)?;
    let transfer = transfer_property(&spec)?;
    let status = match report.status {
        TheoremStatus::Validated => TrialStatus::Validated,
        TheoremStatus::PremisesFailed => TrialStatus::PremisesFailed,
        TheoremStatus::Violation => TrialStatus::Violation,
    };
    Ok(TrialOutcome { seed, status, report: Some(report), transfer: Some(transfer) })
}

/// Runs `trials` seeded trials (seeds `base_seed..base_seed+trials`);
/// trials execute in the ambient thread pool and are aggregated in seed
/// order, so output does not depend on worker count.
pub fn run_campaign(
    trials: u64,
    base_seed: u64,
    bounds: BoundsSpec,
) -> Result<CampaignReport, HarnessError> {
    let outcomes: Result<Vec<TrialOutcome>, HarnessError> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(base_seed.wrapping_add(i), bounds))
        .collect();
    Ok(CampaignReport { trials: outcomes? })
}

/// Ports of the composite on which the consumer side can block a send
/// (receiver not input-enabled at some reachable product state). Collected
/// as campaign statistics.
pub fn blocking_ports(spec: &SystemSpec) -> Result<BTreeSet<String>, HarnessError> {
    use std::collections::VecDeque;
    let mut blocked = BTreeSet::new();
    let start = (spec.c.initial().to_string(), spec.d.initial().to_string());
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some((cs, ds)) = queue.pop_front() {
        let mut visit = |cs2: String, ds2: String| {
            if seen.insert((cs2.clone(), ds2.clone())) {
                queue.push_back((cs2, ds2));
            }
        };
        for m in spec.c.enabled(&cs) {
            if !spec.connections.contains(&m.port) {
                visit(spec.c.step(&cs, &m).expect("enabled").to_string(), ds.clone());
            }
        }
        for m in spec.d.enabled(&ds) {
            let ds2 = spec.d.step(&ds, &m).expect("enabled").to_string();
            if spec.connections.contains(&m.port) {
                let recv = crate::component::Message::input(m.port.clone(), m.value.clone());
                match spec.c.step(&cs, &recv) {
                    Some(cs2) => visit(cs2.to_string(), ds2),
                    None => {
                        blocked.insert(m.port.clone());
                    }
                }
            } else {
                visit(cs.clone(), ds2);
            }
        }
    }
    Ok(blocked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::component::fixtures::{constant_emitter, echo};
    use crate::formula::Formula;

    fn lit(e: EventRef) -> Formula {
        Formula::Literal(e)
    }

    /// Pure emitter feeding echo; the emitter's input port u is declared but
    /// never read, so its tree over u is vacuously correct.
    fn emitter_echo_spec() -> SystemSpec {
        let c = echo();
        let d = constant_emitter();
        let cft_c = Cft::new(lit(EventRef::value("p")), EventRef::value("q"), &c).unwrap();
        let cft_d = Cft::new(lit(EventRef::value("u")), EventRef::value("p"), &d).unwrap();
        let binding = Binding::new([(EventRef::value("p"), cft_d)]).unwrap();
        SystemSpec::new(
            c,
            d,
            vec!["p".to_string()],
            cft_c,
            binding,
            BoundsSpec::CAMPAIGN,
        )
        .unwrap()
    }

    #[test]
    fn emitter_echo_fixture_validates() {
        let spec = emitter_echo_spec();
        let report = validate_theorem_instance(&spec).unwrap();
        assert!(report.premises_hold());
        assert_eq!(report.status, TheoremStatus::Validated);
        assert!(report.conclusion.as_ref().unwrap().all_correct());
        assert!(report.strict_conclusion.as_ref().unwrap().all_correct());
    }

    #[test]
    fn refuted_premise_gates_conclusion() {
        // tracking p only by existence on a value-echo refutes the premise
        let c = echo();
        let d = constant_emitter();
        let cft_c = Cft::new(lit(EventRef::exists("p")), EventRef::value("q"), &c).unwrap();
        let cft_d = Cft::new(lit(EventRef::value("u")), EventRef::exists("p"), &d).unwrap();
        let binding = Binding::new([(EventRef::exists("p"), cft_d)]).unwrap();
        let spec = SystemSpec::new(
            c,
            d,
            vec!["p".to_string()],
            cft_c,
            binding,
            BoundsSpec::CAMPAIGN,
        )
        .unwrap();
        let report = validate_theorem_instance(&spec).unwrap();
        assert_eq!(report.status, TheoremStatus::PremisesFailed);
        assert!(report.conclusion.is_none());
    }

    #[test]
    fn disconnected_components_validate_independently() {
        let c = echo();
        let d = Component::new(
            "inert",
            vec![crate::component::PortDecl {
                name: "u".into(),
                direction: Direction::In,
                domain: vec!["0".into(), "1".into()],
            }],
            ["d0".to_string()],
            "d0",
            [],
        )
        .unwrap();
        let cft_c = Cft::new(lit(EventRef::value("p")), EventRef::value("q"), &c).unwrap();
        let spec =
            SystemSpec::new(c, d, vec![], cft_c, Binding::empty(), BoundsSpec::CAMPAIGN).unwrap();
        let report = validate_theorem_instance(&spec).unwrap();
        assert_eq!(report.status, TheoremStatus::Validated);
    }

    #[test]
    fn transfer_holds_vacuously_without_counterexamples() {
        let spec = emitter_echo_spec();
        let transfer = transfer_property(&spec).unwrap();
        assert!(transfer.cases.is_empty());
        assert!(transfer.holds());
    }

    #[test]
    fn emitter_echo_has_no_blocking_on_sync_free_runs() {
        let spec = emitter_echo_spec();
        // echo holds a pending answer after each sync, so the emitter blocks
        // on p at that product state
        let blocked = blocking_ports(&spec).unwrap();
        assert_eq!(blocked, BTreeSet::from(["p".to_string()]));
    }
}
