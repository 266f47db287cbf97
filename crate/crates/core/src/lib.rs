//! Component fault trees over finite input/output labeled transition
//! systems: formula manipulation, trace equivalence, bounded correctness
//! checking, composition, and a theorem-validation harness.

pub mod cft;
pub mod checker;
pub mod component;
pub mod environment;
pub mod equivalence;
pub mod formula;
pub mod harness;
pub mod model;
pub mod report;

pub use cft::{compose, compose_strict, Binding, Cft};
pub use checker::{
    check_cft, check_clause, check_clause_oracle, simplify_counterexample,
    verify_counterexample, Bounds, CftReport, Counterexample, Verdict,
};
pub use component::{
    compose_components, Component, Direction, Message, PortDecl, Trace, Violation,
};
pub use environment::{enumerate_environments, env_valid, envs_erroneous_pair, EnvTable};
pub use equivalence::{filter_relevant, msg_equiv, msg_irrelevant, trace_equiv, Relation};
pub use formula::{formulas_equiv, EventKind, EventRef, Formula, NegClause};
pub use harness::{
    gen_cft, gen_component, gen_system, run_campaign, transfer_property,
    validate_theorem_instance, BoundsSpec, GenParams, SystemSpec, TheoremReport, TheoremStatus,
};
pub use model::{parse_model, Model};
