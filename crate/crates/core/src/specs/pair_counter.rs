//! A counter split into two halves, `n` and `m`, that share one budget:
//! the application invariant caps `n + m`. Each half has its own increment
//! operation guarded by a headroom check, and merge takes the componentwise
//! max.
//!
//! Sequentially this is airtight — an increment only fires when the new
//! total still fits. Concurrently it is not: two replicas can each pass the
//! headroom check on their own copy and the merged state overshoots the
//! budget. The merge precondition `max(n, n') + max(m, m') ≤ budget` names
//! exactly the pairs that are safe to join, and the checker's concurrent
//! stage reports that the increments fail to preserve it.

use std::sync::Arc;

use crate::model::{
    fld, CmpOp, DomainBounds, EffectFn, IntExpr, ModelError, ObjectSpec, OperationSpec,
    Predicate, Side, StateValue,
};

/// The shared cap on `n + m`.
pub const TOTAL_BUDGET: i64 = 10;

const N: usize = 0;
const M: usize = 1;

fn half(side: Side, slot: usize) -> IntExpr {
    let name = if slot == N { "n" } else { "m" };
    IntExpr::Comp(side, vec![fld(name)])
}

fn bump(slot: usize) -> EffectFn {
    Arc::new(move |state, _call| {
        let mut fields = match state {
            StateValue::Record(fields) => fields.clone(),
            _ => panic!("pair counter state must be a record"),
        };
        match &mut fields[slot] {
            StateValue::Int(v) => *v += 1,
            _ => panic!("pair counter halves must be integers"),
        }
        StateValue::Record(fields)
    })
}

fn increment(name: &str, slot: usize) -> OperationSpec {
    // Headroom for exactly one increment: the budget must still hold after.
    let headroom = half(Side::Local, N)
        .add(half(Side::Local, M))
        .cmp(CmpOp::Le, IntExpr::Const(TOTAL_BUDGET - 1));
    OperationSpec {
        name: name.into(),
        params: Vec::new(),
        precondition: Predicate::unary(vec![("headroom_for_one", headroom)]),
        effect: bump(slot),
    }
}

/// Builds the pair counter. The `n` and `m` ranges come from the bounds
/// (default `0..=12`) and must contain `0..=TOTAL_BUDGET`, otherwise the
/// interesting states around the budget boundary don't exist.
pub fn make_pair_counter(bounds: &DomainBounds) -> Result<ObjectSpec, ModelError> {
    let n_range = bounds.int_range_or("n", (0, 12));
    let m_range = bounds.int_range_or("m", (0, 12));
    for (name, (lo, hi)) in [("n", n_range), ("m", m_range)] {
        if lo > 0 || hi < TOTAL_BUDGET {
            return Err(ModelError::BadBounds(format!(
                "pair counter needs the `{name}` range to contain 0..={TOTAL_BUDGET}, got {lo}..={hi}"
            )));
        }
    }

    let schema = crate::model::StateSchema {
        id_domains: Vec::new(),
        components: vec![
            (
                "n".into(),
                crate::model::ComponentSchema::BoundedInt {
                    min: n_range.0,
                    max: n_range.1,
                },
            ),
            (
                "m".into(),
                crate::model::ComponentSchema::BoundedInt {
                    min: m_range.0,
                    max: m_range.1,
                },
            ),
        ],
    };

    let budget = half(Side::Local, N)
        .add(half(Side::Local, M))
        .cmp(CmpOp::Le, IntExpr::Const(TOTAL_BUDGET));

    // Either replica may have the larger half, so the joint budget is taken
    // over the componentwise maxima — exactly what merge will produce.
    let joint_budget = half(Side::Local, N)
        .max(half(Side::Remote, N))
        .add(half(Side::Local, M).max(half(Side::Remote, M)))
        .cmp(CmpOp::Le, IntExpr::Const(TOTAL_BUDGET));

    let leq = Predicate::binary(vec![
        ("n_grows", half(Side::Local, N).cmp(CmpOp::Le, half(Side::Remote, N))),
        ("m_grows", half(Side::Local, M).cmp(CmpOp::Le, half(Side::Remote, M))),
    ]);

    let merge = Arc::new(|a: &StateValue, b: &StateValue| {
        let (a, b) = match (a, b) {
            (StateValue::Record(a), StateValue::Record(b)) => (a, b),
            _ => panic!("pair counter states must be records"),
        };
        let max_of = |slot: usize| match (&a[slot], &b[slot]) {
            (StateValue::Int(x), StateValue::Int(y)) => StateValue::Int(*x.max(y)),
            _ => panic!("pair counter halves must be integers"),
        };
        StateValue::Record(vec![max_of(N), max_of(M)])
    });

    Ok(ObjectSpec {
        name: "pair_counter".into(),
        schema,
        initial: Some(StateValue::Record(vec![
            StateValue::Int(0),
            StateValue::Int(0),
        ])),
        leq: Some(leq),
        merge: Some(merge),
        operations: vec![increment("incn", N), increment("incm", M)],
        pre_merge: Predicate::binary(vec![("joint_total_within_budget", joint_budget)]),
        invariant: Predicate::unary(vec![("total_within_budget", budget)]),
        static_maps: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_states, EvalCtx};

    fn setup() -> (ObjectSpec, DomainBounds) {
        let bounds = DomainBounds::default();
        let spec = make_pair_counter(&bounds).expect("default bounds are valid");
        (spec, bounds)
    }

    fn s(n: i64, m: i64) -> StateValue {
        StateValue::Record(vec![StateValue::Int(n), StateValue::Int(m)])
    }

    fn invariant_holds(spec: &ObjectSpec, bounds: &DomainBounds, state: &StateValue) -> bool {
        EvalCtx::unary(spec, bounds, state, 0, &[])
            .holds(&spec.invariant)
            .unwrap()
    }

    fn pre_merge_holds(
        spec: &ObjectSpec,
        bounds: &DomainBounds,
        a: &StateValue,
        b: &StateValue,
    ) -> bool {
        EvalCtx::binary(spec, bounds, a, b, 0, &[])
            .holds(&spec.pre_merge)
            .unwrap()
    }

    #[test]
    fn cardinality_is_the_full_range_product() {
        let (spec, bounds) = setup();
        let space = enumerate_states(&spec.schema, &bounds).unwrap();
        assert_eq!(space.cardinality, 169); // 13 × 13 with the default 0..=12 ranges
        assert_eq!(space.states.len(), 169);
    }

    #[test]
    fn increment_bumps_one_half() {
        let (spec, bounds) = setup();
        let next = spec.apply_op(&bounds, "incn", &[], 0, &s(4, 5)).unwrap();
        assert_eq!(next, s(5, 5));
    }

    #[test]
    fn increment_without_headroom_is_rejected() {
        let (spec, bounds) = setup();
        let err = spec.apply_op(&bounds, "incn", &[], 0, &s(5, 5)).unwrap_err();
        match err {
            ModelError::PreconditionViolated { op, clause } => {
                assert_eq!(op, "incn");
                assert_eq!(clause, "headroom_for_one");
            }
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
    }

    #[test]
    fn sequential_increments_accumulate() {
        let (spec, bounds) = setup();
        let once = spec.apply_op(&bounds, "incn", &[], 0, &s(0, 0)).unwrap();
        let twice = spec.apply_op(&bounds, "incn", &[], 0, &once).unwrap();
        assert_eq!(twice, s(2, 0));
    }

    #[test]
    fn merge_is_componentwise_max() {
        let (spec, bounds) = setup();
        let merged = spec.merge_states(&bounds, &s(5, 5), &s(4, 6)).unwrap();
        assert_eq!(merged, s(5, 6));
    }

    #[test]
    fn merged_state_can_break_the_budget() {
        let (spec, bounds) = setup();
        let merged = spec.merge_states(&bounds, &s(5, 5), &s(4, 6)).unwrap();
        assert!(!invariant_holds(&spec, &bounds, &merged));
        let verdict = EvalCtx::unary(&spec, &bounds, &merged, 0, &[])
            .verdict(&spec.invariant)
            .unwrap();
        let failed: Vec<&str> = verdict
            .clauses
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(failed, ["total_within_budget"]);
    }

    #[test]
    fn merge_precondition_tracks_the_joint_budget() {
        let (spec, bounds) = setup();
        // max(4,4) + max(5,6) = 10: still inside the budget.
        assert!(pre_merge_holds(&spec, &bounds, &s(4, 5), &s(4, 6)));
        // max(4,5) + max(5,5) = 10: the pair one increment created.
        assert!(pre_merge_holds(&spec, &bounds, &s(4, 5), &s(5, 5)));
        // max(5,4) + max(5,6) = 11: joining these replicas would overshoot.
        assert!(!pre_merge_holds(&spec, &bounds, &s(5, 5), &s(4, 6)));
    }

    #[test]
    fn order_is_componentwise() {
        let (spec, bounds) = setup();
        assert!(spec.leq_states(&bounds, &s(4, 5), &s(5, 5), 0).unwrap());
        assert!(!spec.leq_states(&bounds, &s(5, 5), &s(4, 6), 0).unwrap());
        // Increments inflate.
        let next = spec.apply_op(&bounds, "incn", &[], 0, &s(4, 5)).unwrap();
        assert!(spec.leq_states(&bounds, &s(4, 5), &next, 0).unwrap());
    }

    #[test]
    fn initial_state_is_sound() {
        let (spec, bounds) = setup();
        let init = spec.initial_state().unwrap().clone();
        assert_eq!(init, s(0, 0));
        assert!(invariant_holds(&spec, &bounds, &init));
        assert!(pre_merge_holds(&spec, &bounds, &init, &init));
    }

    #[test]
    fn ranges_must_cover_the_budget_boundary() {
        let mut bounds = DomainBounds::default();
        bounds.int_ranges.insert("n".into(), (0, 8));
        match make_pair_counter(&bounds) {
            Err(ModelError::BadBounds(msg)) => assert!(msg.contains("0..=10")),
            other => panic!("expected a bounds rejection, got {other:?}"),
        }
    }
}
