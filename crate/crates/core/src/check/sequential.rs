//! Stage 4: safety without concurrency. The initial state must satisfy
//! the invariant (and be self-mergeable at every replica), every enabled
//! operation must carry a valid state to a valid state, and merging any
//! compatible valid pair must land in a valid state.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::model::{DomainBounds, EvalCtx, ModelError, ObjectSpec, StateValue};

use super::config::CheckConfig;
use super::context::{ones, Analysis};
use super::report::{
    AssertionBuilder, CheckStage, Counterexample, OpRef, PredicateCheck, StageReport, Witness,
};

const STAGE: CheckStage = CheckStage::SequentialSafety;

pub fn run(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
    ana: &Analysis,
) -> Result<StageReport, ModelError> {
    let cap = config.max_counterexamples_per_assertion;
    let nv = ana.valid.len();
    let witness = |role: &str, st: &StateValue| Witness::render(role, spec, st);
    let inv_clauses = |st: &StateValue| {
        EvalCtx::unary(spec, bounds, st, 0, &[])
            .verdict(&spec.invariant)
            .map(|v| v.clauses)
    };

    // initial.inv: the starting state is valid and a fresh pair of
    // replicas may merge.
    let mut initial = AssertionBuilder::new("initial.inv", None, cap);
    let init = spec.initial_state()?;
    initial.tick();
    if !EvalCtx::unary(spec, bounds, init, 0, &[]).holds(&spec.invariant)?
        && initial.note_violation()
    {
        initial.record(Counterexample {
            stage: STAGE,
            assertion: "initial.inv".into(),
            operation: None,
            orientation: None,
            witnesses: vec![witness("initial", init)],
            assumptions: Vec::new(),
            failed: PredicateCheck::failure("invariant", None, &["initial"], inv_clauses(init)?),
        });
    }
    for me in 0..bounds.replica_count {
        initial.tick();
        let v = EvalCtx::binary(spec, bounds, init, init, me, &[]).verdict(&spec.pre_merge)?;
        if !v.holds && initial.note_violation() {
            initial.record(Counterexample {
                stage: STAGE,
                assertion: "initial.inv".into(),
                operation: None,
                orientation: None,
                witnesses: vec![witness("initial", init)],
                assumptions: Vec::new(),
                failed: PredicateCheck::failure(
                    "pre_merge",
                    Some(me),
                    &["initial", "initial"],
                    v.clauses,
                ),
            });
        }
    }

    // op.preserves_inv: an enabled call cannot leave the valid region.
    let mut per_op: Vec<AssertionBuilder> = spec
        .operations
        .iter()
        .map(|op| AssertionBuilder::new("op.preserves_inv", Some(&op.name), cap))
        .collect();
    for (op_idx, args) in &ana.instances {
        let op = &spec.operations[*op_idx];
        for me in 0..bounds.replica_count {
            for vi in 0..nv {
                let st = ana.state(vi);
                if !EvalCtx::unary(spec, bounds, st, me, args).holds(&op.precondition)? {
                    continue;
                }
                let post = spec.apply_op(bounds, &op.name, args, me, st)?;
                per_op[*op_idx].tick();
                let holds = EvalCtx::unary(spec, bounds, &post, 0, &[]).holds(&spec.invariant)?;
                if !holds && per_op[*op_idx].note_violation() {
                    let cex = Counterexample {
                        stage: STAGE,
                        assertion: "op.preserves_inv".into(),
                        operation: Some(OpRef::render(spec, bounds, *op_idx, args, me)),
                        orientation: None,
                        witnesses: vec![witness("sigma", st), witness("post_op", &post)],
                        assumptions: vec![
                            PredicateCheck::assumption("invariant", None, &["sigma"]),
                            PredicateCheck::assumption("precondition", Some(me), &["sigma"]),
                        ],
                        failed: PredicateCheck::failure(
                            "invariant",
                            None,
                            &["post_op"],
                            inv_clauses(&post)?,
                        ),
                    };
                    per_op[*op_idx].record(cex);
                }
            }
        }
    }

    // merge.preserves_inv: merging a compatible valid pair stays valid.
    // Single orientation per replica; the flipped pair is its own case.
    let mut merge = AssertionBuilder::new("merge.preserves_inv", None, cap);
    let mut merged_memo: HashMap<(usize, usize), StateValue> = HashMap::new();
    for me in 0..bounds.replica_count {
        let pm = &ana.pm[me];
        for i in 0..nv {
            for j in ones(pm.row(i), nv) {
                let merged = match merged_memo.entry((i, j)) {
                    Entry::Occupied(hit) => hit.into_mut(),
                    Entry::Vacant(slot) => {
                        slot.insert(spec.merge_states(bounds, ana.state(i), ana.state(j))?)
                    }
                };
                merge.tick();
                let holds = EvalCtx::unary(spec, bounds, merged, 0, &[]).holds(&spec.invariant)?;
                if !holds && merge.note_violation() {
                    merge.record(Counterexample {
                        stage: STAGE,
                        assertion: "merge.preserves_inv".into(),
                        operation: None,
                        orientation: None,
                        witnesses: vec![
                            witness("sigma", ana.state(i)),
                            witness("sigma_prime", ana.state(j)),
                            witness("merged", merged),
                        ],
                        assumptions: vec![
                            PredicateCheck::assumption("invariant", None, &["sigma"]),
                            PredicateCheck::assumption("invariant", None, &["sigma_prime"]),
                            PredicateCheck::assumption(
                                "pre_merge",
                                Some(me),
                                &["sigma", "sigma_prime"],
                            ),
                        ],
                        failed: PredicateCheck::failure(
                            "invariant",
                            None,
                            &["merged"],
                            inv_clauses(merged)?,
                        ),
                    });
                }
            }
        }
    }

    let mut assertions = vec![initial.finish()];
    assertions.extend(per_op.into_iter().map(AssertionBuilder::finish));
    assertions.push(merge.finish());
    Ok(StageReport::from_assertions(STAGE, assertions))
}
