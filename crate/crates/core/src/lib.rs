//! Bounded verification of state-based replicated data types.
//!
//! A replicated object is described by a finite state schema, a comparison
//! predicate (the intended partial order), a set of guarded operations, a
//! merge function, an application invariant, and a merge precondition. Over
//! bounded domains this crate can then:
//!
//! * enumerate every state the schema admits ([`model`]),
//! * check the lattice laws and the safety obligations — every operation and
//!   every merge must preserve the invariant *and* the merge precondition —
//!   by exhaustive enumeration ([`check`]),
//! * replay executions over a lossy, reordering network and watch invariants
//!   and convergence on concrete traces ([`sim`]).
//!
//! The [`specs`] module ships ready-made objects: a bounded pair of grow-only
//! counters, a grow-only set, and two auction variants (with and without a
//! token handshake guarding bid placement).

pub mod check;
pub mod model;
pub mod sim;
pub mod specs;

pub use check::{
    run_pipeline, AssertionReport, CheckConfig, CheckReport, CheckStage, CheckStats,
    Counterexample, LeastnessMode, MergePreservation, StageReport, StageSelection, Verdict,
};
pub use model::{
    Arity, Binding, Clause, ComponentSchema, DomainBounds, EffectFn, Expr, IdDomainDecl, IdExpr,
    IntExpr, MergeFn, ModelError, ObjectSpec, OperationSpec, ParamDomain, ParamSpec, PathStep,
    Predicate, Side, StateSchema, StateValue,
};
pub use sim::{
    run_random, run_scenario, Policy, RandomConfig, Scenario, ScenarioEvent, SimError, SimReport,
    Simulator, TraceEntry,
};
