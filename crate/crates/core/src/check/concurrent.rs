//! Stage 5: safety under concurrency. An operation at one replica must
//! not break the merge precondition it shares with any compatible peer —
//! in the operating replica's own merge direction (orientation 1) and,
//! optionally, in the direction of each peer that could merge the updated
//! state back (orientation 2). Separately, merging must not break
//! mergeability: the combined state has to remain compatible with a third
//! state both inputs were compatible with (three-state form) or with its
//! own second input (two-state form).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DomainBounds, EvalCtx, ModelError, ObjectSpec, StateValue};

use super::config::{CheckConfig, LeastnessMode, MergePreservation, DEFAULT_SAMPLES, DEFAULT_SAMPLE_SEED};
use super::context::{and_words, ones, popcount, Analysis};
use super::report::{
    AssertionBuilder, CheckStage, Counterexample, OpRef, PredicateCheck, SampleInfo, StageReport,
    Witness,
};

const STAGE: CheckStage = CheckStage::ConcurrentSafety;

/// Returns the stage report plus the number of merge-preservation triples
/// actually evaluated (zero in the two-state form).
pub fn run(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
    ana: &Analysis,
) -> Result<(StageReport, u64), ModelError> {
    let cap = config.max_counterexamples_per_assertion;
    let nv = ana.valid.len();
    let witness = |role: &str, st: &StateValue| Witness::render(role, spec, st);
    let pm_holds = |a: &StateValue, b: &StateValue, me: usize| {
        EvalCtx::binary(spec, bounds, a, b, me, &[]).holds(&spec.pre_merge)
    };
    let pm_clauses = |a: &StateValue, b: &StateValue, me: usize| {
        EvalCtx::binary(spec, bounds, a, b, me, &[])
            .verdict(&spec.pre_merge)
            .map(|v| v.clauses)
    };

    // op.preserves_pre_merge: σ at `me` can merge with peer σ′; after
    // op(σ) that must still be true (orientation 1: me merges σ′ into the
    // updated state; orientation 2: peer q, who could merge σ into σ′,
    // merges the updated state instead).
    let mut per_op: Vec<AssertionBuilder> = spec
        .operations
        .iter()
        .map(|op| AssertionBuilder::new("op.preserves_pre_merge", Some(&op.name), cap))
        .collect();
    for (op_idx, args) in &ana.instances {
        let op = &spec.operations[*op_idx];
        for me in 0..bounds.replica_count {
            let pm_me = &ana.pm[me];
            for vi in 0..nv {
                let st = ana.state(vi);
                if !EvalCtx::unary(spec, bounds, st, me, args).holds(&op.precondition)? {
                    continue;
                }
                let post = spec.apply_op(bounds, &op.name, args, me, st)?;
                for vj in ones(pm_me.row(vi), nv) {
                    let peer = ana.state(vj);
                    let base_assumptions = || {
                        vec![
                            PredicateCheck::assumption("invariant", None, &["sigma"]),
                            PredicateCheck::assumption("invariant", None, &["sigma_prime"]),
                            PredicateCheck::assumption(
                                "pre_merge",
                                Some(me),
                                &["sigma", "sigma_prime"],
                            ),
                            PredicateCheck::assumption("precondition", Some(me), &["sigma"]),
                        ]
                    };
                    per_op[*op_idx].tick();
                    if !pm_holds(&post, peer, me)? && per_op[*op_idx].note_violation() {
                        let cex = Counterexample {
                            stage: STAGE,
                            assertion: "op.preserves_pre_merge".into(),
                            operation: Some(OpRef::render(spec, bounds, *op_idx, args, me)),
                            orientation: Some(1),
                            witnesses: vec![
                                witness("sigma", st),
                                witness("sigma_prime", peer),
                                witness("post_op", &post),
                            ],
                            assumptions: base_assumptions(),
                            failed: PredicateCheck::failure(
                                "pre_merge",
                                Some(me),
                                &["post_op", "sigma_prime"],
                                pm_clauses(&post, peer, me)?,
                            ),
                        };
                        per_op[*op_idx].record(cex);
                    }
                    if !config.check_both_pre_merge_orientations {
                        continue;
                    }
                    for q in 0..bounds.replica_count {
                        if q == me || !ana.pm[q].get(vj, vi) {
                            continue;
                        }
                        per_op[*op_idx].tick();
                        if !pm_holds(peer, &post, q)? && per_op[*op_idx].note_violation() {
                            let mut assumptions = base_assumptions();
                            assumptions.insert(
                                3,
                                PredicateCheck::assumption(
                                    "pre_merge",
                                    Some(q),
                                    &["sigma_prime", "sigma"],
                                ),
                            );
                            let cex = Counterexample {
                                stage: STAGE,
                                assertion: "op.preserves_pre_merge".into(),
                                operation: Some(OpRef::render(spec, bounds, *op_idx, args, me)),
                                orientation: Some(2),
                                witnesses: vec![
                                    witness("sigma", st),
                                    witness("sigma_prime", peer),
                                    witness("post_op", &post),
                                ],
                                assumptions,
                                failed: PredicateCheck::failure(
                                    "pre_merge",
                                    Some(q),
                                    &["sigma_prime", "post_op"],
                                    pm_clauses(peer, &post, q)?,
                                ),
                            };
                            per_op[*op_idx].record(cex);
                        }
                    }
                }
            }
        }
    }

    // merge.preserves_pre_merge.
    let mut merge = AssertionBuilder::new("merge.preserves_pre_merge", None, cap);
    let mut triples: u64 = 0;
    let mut merged_memo: HashMap<(usize, usize), StateValue> = HashMap::new();
    let mut merged_of = |i: usize, j: usize| -> Result<StateValue, ModelError> {
        if let Some(m) = merged_memo.get(&(i, j)) {
            return Ok(m.clone());
        }
        let m = spec.merge_states(bounds, ana.state(i), ana.state(j))?;
        merged_memo.insert((i, j), m.clone());
        Ok(m)
    };
    let pair_assumptions = |me: usize| {
        vec![
            PredicateCheck::assumption("invariant", None, &["sigma"]),
            PredicateCheck::assumption("invariant", None, &["sigma_prime"]),
            PredicateCheck::assumption("pre_merge", Some(me), &["sigma", "sigma_prime"]),
            PredicateCheck::assumption("pre_merge", Some(me), &["sigma_prime", "sigma"]),
        ]
    };

    match config.merge_preservation {
        MergePreservation::TwoState => {
            for me in 0..bounds.replica_count {
                let pb = &ana.pm_both[me];
                for i in 0..nv {
                    for j in ones(pb.row(i), nv) {
                        let merged = merged_of(i, j)?;
                        merge.tick();
                        if !pm_holds(&merged, ana.state(j), me)? && merge.note_violation() {
                            merge.record(Counterexample {
                                stage: STAGE,
                                assertion: "merge.preserves_pre_merge".into(),
                                operation: None,
                                orientation: None,
                                witnesses: vec![
                                    witness("sigma", ana.state(i)),
                                    witness("sigma_prime", ana.state(j)),
                                    witness("merged", &merged),
                                ],
                                assumptions: pair_assumptions(me),
                                failed: PredicateCheck::failure(
                                    "pre_merge",
                                    Some(me),
                                    &["merged", "sigma_prime"],
                                    pm_clauses(&merged, ana.state(j), me)?,
                                ),
                            });
                        }
                    }
                }
            }
        }
        MergePreservation::ThreeState => {
            let triple_assumptions = |me: usize| {
                let mut v = vec![
                    PredicateCheck::assumption("invariant", None, &["sigma"]),
                    PredicateCheck::assumption("invariant", None, &["sigma_prime"]),
                    PredicateCheck::assumption("invariant", None, &["sigma_second"]),
                ];
                for (a, b) in [
                    ("sigma", "sigma_prime"),
                    ("sigma_prime", "sigma"),
                    ("sigma", "sigma_second"),
                    ("sigma_second", "sigma"),
                    ("sigma_prime", "sigma_second"),
                    ("sigma_second", "sigma_prime"),
                ] {
                    v.push(PredicateCheck::assumption("pre_merge", Some(me), &[a, b]));
                }
                v
            };
            let record_triple = |merge: &mut AssertionBuilder,
                                 me: usize,
                                 i: usize,
                                 j: usize,
                                 merged: &StateValue,
                                 third: &StateValue|
             -> Result<(), ModelError> {
                merge.record(Counterexample {
                    stage: STAGE,
                    assertion: "merge.preserves_pre_merge".into(),
                    operation: None,
                    orientation: None,
                    witnesses: vec![
                        witness("sigma", ana.state(i)),
                        witness("sigma_prime", ana.state(j)),
                        witness("sigma_second", third),
                        witness("merged", merged),
                    ],
                    assumptions: triple_assumptions(me),
                    failed: PredicateCheck::failure(
                        "pre_merge",
                        Some(me),
                        &["merged", "sigma_second"],
                        pm_clauses(merged, third, me)?,
                    ),
                });
                Ok(())
            };

            let mut total: u64 = 0;
            for me in 0..bounds.replica_count {
                let pb = &ana.pm_both[me];
                for i in 0..nv {
                    for j in ones(pb.row(i), nv) {
                        total += popcount(&and_words(pb.row(i), pb.row(j)));
                    }
                }
            }
            let exhaustive = match config.leastness {
                LeastnessMode::Exhaustive => true,
                LeastnessMode::Sampled { .. } => false,
                LeastnessMode::Auto => total <= config.exhaustive_budget,
            };
            if exhaustive {
                for me in 0..bounds.replica_count {
                    let pb = &ana.pm_both[me];
                    for i in 0..nv {
                        for j in ones(pb.row(i), nv) {
                            let merged = merged_of(i, j)?;
                            let third_set = and_words(pb.row(i), pb.row(j));
                            for k in ones(&third_set, nv) {
                                merge.tick();
                                triples += 1;
                                let ok = pm_holds(&merged, ana.state(k), me)?;
                                if !ok && merge.note_violation() {
                                    record_triple(&mut merge, me, i, j, &merged, ana.state(k))?;
                                }
                            }
                        }
                    }
                }
            } else {
                let (samples, seed) = match config.leastness {
                    LeastnessMode::Sampled { samples, seed } => (samples, seed),
                    _ => (DEFAULT_SAMPLES, DEFAULT_SAMPLE_SEED),
                };
                let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
                for me in 0..bounds.replica_count {
                    let pb = &ana.pm_both[me];
                    for i in 0..nv {
                        for j in ones(pb.row(i), nv) {
                            pairs.push((me, i, j));
                        }
                    }
                }
                if !pairs.is_empty() && nv > 0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for _ in 0..samples {
                        let (me, i, j) = pairs[rng.gen_range(0..pairs.len())];
                        let k = rng.gen_range(0..nv);
                        let pb = &ana.pm_both[me];
                        if !(pb.get(i, k) && pb.get(j, k)) {
                            continue;
                        }
                        let merged = merged_of(i, j)?;
                        merge.tick();
                        triples += 1;
                        if !pm_holds(&merged, ana.state(k), me)? && merge.note_violation() {
                            record_triple(&mut merge, me, i, j, &merged, ana.state(k))?;
                        }
                    }
                }
                merge.set_sampled(SampleInfo { samples, seed });
            }
        }
    }

    let mut assertions: Vec<_> = per_op.into_iter().map(AssertionBuilder::finish).collect();
    assertions.push(merge.finish());
    Ok((StageReport::from_assertions(STAGE, assertions), triples))
}
