//! The object model: schemas, values, expressions, and specs.

mod enumerate;
mod error;
mod eval;
mod expr;
mod schema;
mod spec;
mod value;

pub use enumerate::{cardinality, enumerate_states, rank_state, unrank_state, StateSpace};
pub use error::ModelError;
pub use eval::{expr_references_me, validate_predicate, ClauseVerdict, EvalCtx, PredicateVerdict};
pub use expr::{at, fld, var, CmpOp, Expr, IdExpr, IntExpr, Path, PathStep, RefRhs, Side};
pub use schema::{ComponentSchema, DomainBounds, IdDomainDecl, StateSchema, REPLICAS_DOMAIN};
pub use spec::{
    Arity, Binding, Clause, EffectFn, MergeFn, ObjectSpec, OpArgs, OpCall, OperationSpec,
    ParamDomain, ParamSpec, Predicate, StaticIdMap,
};
pub use value::StateValue;

/// Display name of replica `i` (zero-based index), e.g. `r1` for index 0.
pub fn replica_name(i: usize) -> String {
    format!("r{}", i + 1)
}

/// Inverse of [`replica_name`]; also accepts plain zero-based integers.
pub fn parse_replica(name: &str, replica_count: usize) -> Result<usize, ModelError> {
    let idx = name
        .strip_prefix('r')
        .and_then(|n| n.parse::<usize>().ok())
        .and_then(|n| n.checked_sub(1));
    match idx {
        Some(i) if i < replica_count => Ok(i),
        _ => Err(ModelError::BadParams {
            op: "replica".into(),
            reason: format!("unknown replica `{name}` (have r1..r{replica_count})"),
        }),
    }
}
