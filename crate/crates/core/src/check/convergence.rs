//! Stage 3: lattice laws. Over the valid region the comparison must be a
//! partial order, every enabled operation must inflate its replica's
//! state, and merge must produce the least upper bound. The leastness law
//! quantifies upper-bound candidates over the full enumerated domain, so a
//! merge cannot hide above the valid region; when that candidate space
//! exceeds the exhaustive budget it is sampled with a fixed seed instead.
//!
//! The order laws are additionally evaluated over the raw domain as an
//! informational pass: some perfectly convergent designs (e.g. orders that
//! ignore a field which the invariant pins down) only satisfy the laws
//! once the invariant is assumed, and that is worth telling the reader
//! without failing the stage.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{DomainBounds, EvalCtx, ModelError, ObjectSpec, Predicate, StateValue};

use super::config::{CheckConfig, LeastnessMode, DEFAULT_SAMPLES, DEFAULT_SAMPLE_SEED};
use super::context::{
    and_not_words, and_words, ones, popcount, Analysis, BitMatrix,
};
use super::report::{
    AssertionBuilder, CheckStage, Counterexample, OpRef, PredicateCheck, SampleInfo, StageReport,
    Witness,
};

const STAGE: CheckStage = CheckStage::Convergence;

pub fn run(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
    ana: &Analysis,
) -> Result<StageReport, ModelError> {
    let cap = config.max_counterexamples_per_assertion;
    let leq_pred = spec.leq_predicate()?;
    let nv = ana.valid.len();

    let leq = |a: &StateValue, b: &StateValue| -> Result<bool, ModelError> {
        EvalCtx::binary(spec, bounds, a, b, 0, &[]).holds(leq_pred)
    };
    let leq_clauses = |a: &StateValue, b: &StateValue| {
        EvalCtx::binary(spec, bounds, a, b, 0, &[])
            .verdict(leq_pred)
            .map(|v| v.clauses)
    };

    // σᵢ ≤ σⱼ over the valid region.
    let lv = {
        let rows = (0..nv)
            .into_par_iter()
            .map(|i| {
                let a = ana.state(i);
                let mut row = vec![0u64; BitMatrix::words_for(nv)];
                for j in 0..nv {
                    if leq(a, ana.state(j))? {
                        row[j / 64] |= 1u64 << (j % 64);
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        BitMatrix::from_rows(nv, rows)
    };

    let witness = |role: &str, st: &StateValue| Witness::render(role, spec, st);
    let inv_assumed = |role: &str| PredicateCheck::assumption("invariant", None, &[role]);

    // order.reflexivity: every valid state compares to itself.
    let mut refl = AssertionBuilder::new("order.reflexivity", None, cap);
    for i in 0..nv {
        refl.tick();
        if !lv.get(i, i) && refl.note_violation() {
            let st = ana.state(i);
            refl.record(Counterexample {
                stage: STAGE,
                assertion: "order.reflexivity".into(),
                operation: None,
                orientation: None,
                witnesses: vec![witness("sigma", st)],
                assumptions: vec![inv_assumed("sigma")],
                failed: PredicateCheck::failure("leq", None, &["sigma", "sigma"], leq_clauses(st, st)?),
            });
        }
    }

    // order.transitivity over valid triples.
    let mut trans = AssertionBuilder::new("order.transitivity", None, cap);
    for i in 0..nv {
        for j in ones(lv.row(i), nv) {
            trans.tick_by(popcount(lv.row(j)));
            let missing = and_not_words(lv.row(j), lv.row(i));
            for k in ones(&missing, nv) {
                if trans.note_violation() {
                    let (a, b, c) = (ana.state(i), ana.state(j), ana.state(k));
                    trans.record(Counterexample {
                        stage: STAGE,
                        assertion: "order.transitivity".into(),
                        operation: None,
                        orientation: None,
                        witnesses: vec![
                            witness("sigma", a),
                            witness("sigma_prime", b),
                            witness("sigma_second", c),
                        ],
                        assumptions: vec![
                            inv_assumed("sigma"),
                            inv_assumed("sigma_prime"),
                            inv_assumed("sigma_second"),
                            PredicateCheck::assumption("leq", None, &["sigma", "sigma_prime"]),
                            PredicateCheck::assumption("leq", None, &["sigma_prime", "sigma_second"]),
                        ],
                        failed: PredicateCheck::failure(
                            "leq",
                            None,
                            &["sigma", "sigma_second"],
                            leq_clauses(a, c)?,
                        ),
                    });
                }
            }
        }
    }

    // order.antisymmetry over mergeable valid pairs: two distinct states
    // must not be ordered both ways.
    let mut anti = AssertionBuilder::new("order.antisymmetry", None, cap);
    for me in 0..bounds.replica_count {
        let pb = &ana.pm_both[me];
        for i in 0..nv {
            for j in ones(pb.row(i), nv) {
                if j <= i {
                    continue;
                }
                anti.tick();
                // Enumerated states at distinct ranks are distinct values.
                if lv.get(i, j) && lv.get(j, i) && anti.note_violation() {
                    anti.record(Counterexample {
                        stage: STAGE,
                        assertion: "order.antisymmetry".into(),
                        operation: None,
                        orientation: None,
                        witnesses: vec![
                            witness("sigma", ana.state(i)),
                            witness("sigma_prime", ana.state(j)),
                        ],
                        assumptions: vec![
                            inv_assumed("sigma"),
                            inv_assumed("sigma_prime"),
                            PredicateCheck::assumption(
                                "pre_merge",
                                Some(me),
                                &["sigma", "sigma_prime"],
                            ),
                            PredicateCheck::assumption(
                                "pre_merge",
                                Some(me),
                                &["sigma_prime", "sigma"],
                            ),
                            PredicateCheck::assumption("leq", None, &["sigma", "sigma_prime"]),
                            PredicateCheck::assumption("leq", None, &["sigma_prime", "sigma"]),
                        ],
                        failed: PredicateCheck::failure(
                            "state_equality",
                            None,
                            &["sigma", "sigma_prime"],
                            Vec::new(),
                        ),
                    });
                }
            }
        }
    }

    // inflation: σ ≤ op(σ) wherever the precondition enables the call.
    let mut inflation: Vec<AssertionBuilder> = spec
        .operations
        .iter()
        .map(|op| AssertionBuilder::new("inflation", Some(&op.name), cap))
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
                let b = &mut inflation[*op_idx];
                b.tick();
                if !leq(st, &post)? && b.note_violation() {
                    let cex = Counterexample {
                        stage: STAGE,
                        assertion: "inflation".into(),
                        operation: Some(OpRef::render(spec, bounds, *op_idx, args, me)),
                        orientation: None,
                        witnesses: vec![witness("sigma", st), witness("post_op", &post)],
                        assumptions: vec![
                            inv_assumed("sigma"),
                            PredicateCheck::assumption("precondition", Some(me), &["sigma"]),
                        ],
                        failed: PredicateCheck::failure(
                            "leq",
                            None,
                            &["sigma", "post_op"],
                            leq_clauses(st, &post)?,
                        ),
                    };
                    inflation[*op_idx].record(cex);
                }
            }
        }
    }

    // Merge results recur across laws and replicas; compute each pair once.
    let mut merged_memo: HashMap<(usize, usize), StateValue> = HashMap::new();
    let mut merged_of = |i: usize, j: usize| -> Result<StateValue, ModelError> {
        if let Some(m) = merged_memo.get(&(i, j)) {
            return Ok(m.clone());
        }
        let m = spec.merge_states(bounds, ana.state(i), ana.state(j))?;
        merged_memo.insert((i, j), m.clone());
        Ok(m)
    };

    let merge_assumptions = |me: usize| {
        vec![
            inv_assumed("sigma"),
            inv_assumed("sigma_prime"),
            PredicateCheck::assumption("pre_merge", Some(me), &["sigma", "sigma_prime"]),
            PredicateCheck::assumption("pre_merge", Some(me), &["sigma_prime", "sigma"]),
        ]
    };

    // merge.upper_bound: both inputs sit below the merge result.
    let mut ub = AssertionBuilder::new("merge.upper_bound", None, cap);
    for me in 0..bounds.replica_count {
        let pb = &ana.pm_both[me];
        for i in 0..nv {
            for j in ones(pb.row(i), nv) {
                let merged = merged_of(i, j)?;
                ub.tick();
                let below = [leq(ana.state(i), &merged)?, leq(ana.state(j), &merged)?];
                if below.iter().all(|b| *b) {
                    continue;
                }
                if ub.note_violation() {
                    let (role, failing) = if !below[0] {
                        ("sigma", ana.state(i))
                    } else {
                        ("sigma_prime", ana.state(j))
                    };
                    ub.record(Counterexample {
                        stage: STAGE,
                        assertion: "merge.upper_bound".into(),
                        operation: None,
                        orientation: None,
                        witnesses: vec![
                            witness("sigma", ana.state(i)),
                            witness("sigma_prime", ana.state(j)),
                            witness("merged", &merged),
                        ],
                        assumptions: merge_assumptions(me),
                        failed: PredicateCheck::failure(
                            "leq",
                            None,
                            &[role, "merged"],
                            leq_clauses(failing, &merged)?,
                        ),
                    });
                }
            }
        }
    }

    // merge.least: no enumerated state above both inputs sits below the
    // merge result's position, i.e. merged ≤ every common upper bound.
    let mut least = AssertionBuilder::new("merge.least", None, cap);
    {
        let raw_n = ana.space.states.len();
        let pair_count: u64 = ana.pm_both.iter().map(|m| m.count_ones()).sum();
        let exhaustive = match config.leastness {
            LeastnessMode::Exhaustive => true,
            LeastnessMode::Sampled { .. } => false,
            LeastnessMode::Auto => {
                pair_count.saturating_mul(raw_n as u64) <= config.exhaustive_budget
            }
        };
        let record_least = |least: &mut AssertionBuilder,
                            me: usize,
                            i: usize,
                            j: usize,
                            merged: &StateValue,
                            star: &StateValue|
         -> Result<(), ModelError> {
            let mut assumptions = merge_assumptions(me);
            assumptions.push(PredicateCheck::assumption("leq", None, &["sigma", "sigma_star"]));
            assumptions.push(PredicateCheck::assumption(
                "leq",
                None,
                &["sigma_prime", "sigma_star"],
            ));
            least.record(Counterexample {
                stage: STAGE,
                assertion: "merge.least".into(),
                operation: None,
                orientation: None,
                witnesses: vec![
                    witness("sigma", ana.state(i)),
                    witness("sigma_prime", ana.state(j)),
                    witness("merged", merged),
                    witness("sigma_star", star),
                ],
                assumptions,
                failed: PredicateCheck::failure(
                    "leq",
                    None,
                    &["merged", "sigma_star"],
                    leq_clauses(merged, star)?,
                ),
            });
            Ok(())
        };

        if exhaustive {
            // σᵢ ≤ rawₖ for every valid row, raw column.
            let vr = {
                let rows = (0..nv)
                    .into_par_iter()
                    .map(|i| {
                        let a = ana.state(i);
                        let mut row = vec![0u64; BitMatrix::words_for(raw_n)];
                        for (k, star) in ana.space.states.iter().enumerate() {
                            if leq(a, star)? {
                                row[k / 64] |= 1u64 << (k % 64);
                            }
                        }
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>, ModelError>>()?;
                BitMatrix::from_rows(raw_n, rows)
            };
            // merged ≤ rawₖ rows, keyed by the merged state (the same
            // result tends to recur across many pairs).
            let mut merged_rows: HashMap<StateValue, Vec<u64>> = HashMap::new();
            for me in 0..bounds.replica_count {
                let pb = &ana.pm_both[me];
                for i in 0..nv {
                    for j in ones(pb.row(i), nv) {
                        let merged = merged_of(i, j)?;
                        if !merged_rows.contains_key(&merged) {
                            let mut row = vec![0u64; BitMatrix::words_for(raw_n)];
                            for (k, star) in ana.space.states.iter().enumerate() {
                                if leq(&merged, star)? {
                                    row[k / 64] |= 1u64 << (k % 64);
                                }
                            }
                            merged_rows.insert(merged.clone(), row);
                        }
                        let above_merged = &merged_rows[&merged];
                        let candidates = and_words(vr.row(i), vr.row(j));
                        least.tick_by(popcount(&candidates));
                        let misses = and_not_words(&candidates, above_merged);
                        for k in ones(&misses, raw_n) {
                            if least.note_violation() {
                                record_least(&mut least, me, i, j, &merged, &ana.space.states[k])?;
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
            if !pairs.is_empty() && raw_n > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..samples {
                    let (me, i, j) = pairs[rng.gen_range(0..pairs.len())];
                    let star = &ana.space.states[rng.gen_range(0..raw_n)];
                    if !(leq(ana.state(i), star)? && leq(ana.state(j), star)?) {
                        continue;
                    }
                    let merged = merged_of(i, j)?;
                    least.tick();
                    if !leq(&merged, star)? && least.note_violation() {
                        record_least(&mut least, me, i, j, &merged, star)?;
                    }
                }
            }
            least.set_sampled(SampleInfo { samples, seed });
        }
    }

    let mut assertions = vec![refl.finish(), trans.finish(), anti.finish()];
    assertions.extend(inflation.into_iter().map(AssertionBuilder::finish));
    assertions.push(ub.finish());
    assertions.push(least.finish());
    let mut report = StageReport::from_assertions(STAGE, assertions);
    if config.informational_raw_laws {
        report
            .warnings
            .extend(raw_domain_law_warnings(spec, bounds, config, ana, leq_pred)?);
    }
    Ok(report)
}

/// Evaluates the three order laws over every enumerated state, invariant
/// or not, and summarizes failures as warnings.
fn raw_domain_law_warnings(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
    ana: &Analysis,
    leq_pred: &Predicate,
) -> Result<Vec<String>, ModelError> {
    let raw_n = ana.space.states.len();
    let comparisons = (raw_n as u64).saturating_mul(raw_n as u64);
    if comparisons > config.exhaustive_budget {
        return Ok(vec![format!(
            "informational: raw-domain order laws not evaluated ({raw_n}^2 comparisons exceed \
             the exhaustive budget)"
        )]);
    }

    let rows = (0..raw_n)
        .into_par_iter()
        .map(|i| {
            let a = &ana.space.states[i];
            let mut row = vec![0u64; BitMatrix::words_for(raw_n)];
            for (j, b) in ana.space.states.iter().enumerate() {
                if EvalCtx::binary(spec, bounds, a, b, 0, &[]).holds(leq_pred)? {
                    row[j / 64] |= 1u64 << (j % 64);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let r = BitMatrix::from_rows(raw_n, rows);

    let mut refl_misses: u64 = 0;
    for i in 0..raw_n {
        if !r.get(i, i) {
            refl_misses += 1;
        }
    }
    let mut anti_pairs: u64 = 0;
    for i in 0..raw_n {
        for j in ones(r.row(i), raw_n) {
            if j > i && r.get(j, i) {
                anti_pairs += 1;
            }
        }
    }
    let mut trans_misses: u64 = 0;
    for i in 0..raw_n {
        for j in ones(r.row(i), raw_n) {
            trans_misses += popcount(&and_not_words(r.row(j), r.row(i)));
        }
    }

    let mut warnings = Vec::new();
    if refl_misses > 0 {
        warnings.push(format!(
            "informational: order.reflexivity fails on the raw domain for {refl_misses} of \
             {raw_n} states; the valid-region verdict above is authoritative"
        ));
    }
    if anti_pairs > 0 {
        warnings.push(format!(
            "informational: order.antisymmetry fails on the raw domain for {anti_pairs} \
             distinct mutually-ordered pairs; the valid-region verdict above is authoritative"
        ));
    }
    if trans_misses > 0 {
        warnings.push(format!(
            "informational: order.transitivity fails on the raw domain for {trans_misses} \
             chains; the valid-region verdict above is authoritative"
        ));
    }
    Ok(warnings)
}
