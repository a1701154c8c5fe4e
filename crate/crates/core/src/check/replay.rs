//! Counterexample replay: a report is only trustworthy if its evidence
//! can be re-executed. Given a counterexample and the spec it came from,
//! this re-parses the witness states, recomputes every derived state
//! (operation result, merge result), re-evaluates every recorded
//! assumption and the failed assertion, and errors on any disagreement
//! with what the report claims.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{
    parse_replica, DomainBounds, EvalCtx, ModelError, ObjectSpec, OpArgs, Predicate, StateValue,
};

use super::report::{Counterexample, PredicateCheck};

/// A resolved operation reference: name, parsed arguments, acting replica.
type OpCallSpec = (String, OpArgs, usize);

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("counterexample has no `{0}` witness")]
    MissingWitness(String),
    #[error("counterexample names no operation but its evidence requires one")]
    MissingOperation,
    #[error("`{0}` counterexamples carry no replayable states")]
    NotReplayable(String),
    #[error("replayed `{role}` differs from the recorded witness")]
    DerivedMismatch { role: String },
    #[error("`{predicate}` did not replay with its recorded outcome (holds={recorded})")]
    VerdictMismatch { predicate: String, recorded: bool },
    #[error("clause `{clause}` of the failed assertion replays differently")]
    ClauseMismatch { clause: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Re-executes one counterexample against the spec, erroring on the first
/// discrepancy. `Ok(())` means every recorded claim reproduced.
pub fn replay_counterexample(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    cex: &Counterexample,
) -> Result<(), ReplayError> {
    if cex.witnesses.is_empty() {
        return Err(ReplayError::NotReplayable(cex.assertion.clone()));
    }

    let mut states: HashMap<&str, StateValue> = HashMap::new();
    for w in &cex.witnesses {
        let value = StateValue::parse(&spec.schema, bounds, &w.state)?;
        states.insert(w.role.as_str(), value);
    }
    let resolve = |role: &str| -> Result<&StateValue, ReplayError> {
        states
            .get(role)
            .ok_or_else(|| ReplayError::MissingWitness(role.into()))
    };

    // Resolve the operation instance, if any.
    let op_call: Option<OpCallSpec> = match &cex.operation {
        None => None,
        Some(op_ref) => {
            let args = spec.parse_args(bounds, &op_ref.name, &op_ref.args)?;
            let me = parse_replica(&op_ref.origin, bounds.replica_count)?;
            Some((op_ref.name.clone(), args, me))
        }
    };

    // Recompute derived witnesses and compare against the recorded ones.
    if states.contains_key("post_op") {
        let (name, args, me) = op_call.as_ref().ok_or(ReplayError::MissingOperation)?;
        let base = resolve("sigma")?.clone();
        let post = spec.apply_op(bounds, name, args, *me, &base)?;
        if &post != resolve("post_op")? {
            return Err(ReplayError::DerivedMismatch {
                role: "post_op".into(),
            });
        }
    }
    if states.contains_key("merged") {
        let merged = spec.merge_states(bounds, resolve("sigma")?, resolve("sigma_prime")?)?;
        if &merged != resolve("merged")? {
            return Err(ReplayError::DerivedMismatch {
                role: "merged".into(),
            });
        }
    }

    for check in &cex.assumptions {
        let replayed = evaluate(spec, bounds, check, &op_call, &resolve)?;
        if replayed != check.holds {
            return Err(ReplayError::VerdictMismatch {
                predicate: check.predicate.clone(),
                recorded: check.holds,
            });
        }
    }
    let replayed = evaluate(spec, bounds, &cex.failed, &op_call, &resolve)?;
    if replayed != cex.failed.holds {
        return Err(ReplayError::VerdictMismatch {
            predicate: cex.failed.predicate.clone(),
            recorded: cex.failed.holds,
        });
    }
    verify_clauses(spec, bounds, &cex.failed, &op_call, &resolve)?;
    Ok(())
}

fn predicate_of<'a>(
    spec: &'a ObjectSpec,
    check: &PredicateCheck,
    op_call: &Option<OpCallSpec>,
) -> Result<Option<&'a Predicate>, ReplayError> {
    match check.predicate.as_str() {
        "invariant" => Ok(Some(&spec.invariant)),
        "pre_merge" => Ok(Some(&spec.pre_merge)),
        "leq" => Ok(Some(spec.leq_predicate()?)),
        "precondition" => {
            let (name, _, _) = op_call.as_ref().ok_or(ReplayError::MissingOperation)?;
            Ok(Some(&spec.operation(name)?.precondition))
        }
        _ => Ok(None),
    }
}

fn evaluate<'a>(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    check: &PredicateCheck,
    op_call: &Option<OpCallSpec>,
    resolve: &impl Fn(&str) -> Result<&'a StateValue, ReplayError>,
) -> Result<bool, ReplayError> {
    if check.predicate == "state_equality" {
        let a = resolve(role_at(check, 0)?)?;
        let b = resolve(role_at(check, 1)?)?;
        return Ok(a == b);
    }
    let pred = predicate_of(spec, check, op_call)?
        .ok_or_else(|| ReplayError::NotReplayable(check.predicate.clone()))?;
    let (me, args) = check_context(check, op_call, bounds)?;
    let holds = match check.states.len() {
        1 => {
            let st = resolve(role_at(check, 0)?)?;
            EvalCtx::unary(spec, bounds, st, me, &args).holds(pred)?
        }
        2 => {
            let local = resolve(role_at(check, 0)?)?;
            let remote = resolve(role_at(check, 1)?)?;
            EvalCtx::binary(spec, bounds, local, remote, me, &args).holds(pred)?
        }
        n => {
            return Err(ModelError::BadParams {
                op: check.predicate.clone(),
                reason: format!("expected 1 or 2 states, found {n}"),
            }
            .into())
        }
    };
    Ok(holds)
}

/// Re-runs the per-clause verdict of the failed assertion and checks each
/// clause resolves the way the report printed it.
fn verify_clauses<'a>(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    check: &PredicateCheck,
    op_call: &Option<OpCallSpec>,
    resolve: &impl Fn(&str) -> Result<&'a StateValue, ReplayError>,
) -> Result<(), ReplayError> {
    if check.clauses.is_empty() {
        return Ok(());
    }
    let Some(pred) = predicate_of(spec, check, op_call)? else {
        return Ok(());
    };
    let (me, args) = check_context(check, op_call, bounds)?;
    let verdict = match check.states.len() {
        1 => EvalCtx::unary(spec, bounds, resolve(role_at(check, 0)?)?, me, &args).verdict(pred)?,
        _ => EvalCtx::binary(
            spec,
            bounds,
            resolve(role_at(check, 0)?)?,
            resolve(role_at(check, 1)?)?,
            me,
            &args,
        )
        .verdict(pred)?,
    };
    for recorded in &check.clauses {
        let replayed = verdict.clauses.iter().find(|c| c.name == recorded.name);
        match replayed {
            Some(c) if c.holds == recorded.holds => {}
            _ => {
                return Err(ReplayError::ClauseMismatch {
                    clause: recorded.name.clone(),
                })
            }
        }
    }
    Ok(())
}

fn role_at(check: &PredicateCheck, i: usize) -> Result<&str, ReplayError> {
    check
        .states
        .get(i)
        .map(String::as_str)
        .ok_or_else(|| ReplayError::MissingWitness(format!("state #{i} of `{}`", check.predicate)))
}

/// The replica index and parameter bindings a check evaluates under.
fn check_context(
    check: &PredicateCheck,
    op_call: &Option<OpCallSpec>,
    bounds: &DomainBounds,
) -> Result<(usize, OpArgs), ReplayError> {
    let me = match &check.me {
        Some(name) => parse_replica(name, bounds.replica_count)?,
        None => 0,
    };
    let args = if check.predicate == "precondition" {
        let (_, args, _) = op_call.as_ref().ok_or(ReplayError::MissingOperation)?;
        args.clone()
    } else {
        Vec::new()
    };
    Ok((me, args))
}
