//! A grow-only set over a finite element domain. Membership flags only flip
//! from false to true, merge is set union, and the order is set inclusion.
//! There is no application invariant and no merge precondition, so every
//! checker stage passes — this is the baseline "trivially convergent"
//! object.

use std::sync::Arc;

use crate::model::{
    at, fld, var, ComponentSchema, DomainBounds, Expr, IdDomainDecl, ModelError, ObjectSpec,
    OperationSpec, ParamDomain, ParamSpec, Predicate, Side, StateSchema, StateValue,
};

/// Builds the grow-only set. The element domain `elems` takes its
/// cardinality from the bounds.
pub fn make_gset(bounds: &DomainBounds) -> Result<ObjectSpec, ModelError> {
    let elem_count = bounds.domain_size("elems")?;

    let schema = StateSchema {
        id_domains: vec![IdDomainDecl {
            name: "elems".into(),
            elem_prefix: "e".into(),
        }],
        components: vec![(
            "members".into(),
            ComponentSchema::FixedMap {
                domain: "elems".into(),
                value: Box::new(ComponentSchema::Flag { top: true }),
            },
        )],
    };

    let member = |side: Side, id| Expr::Flag(side, vec![fld("members"), at(id)]);

    let add = OperationSpec {
        name: "add".into(),
        params: vec![ParamSpec {
            name: "e".into(),
            domain: ParamDomain::Id("elems".into()),
        }],
        precondition: Predicate::unary(vec![(
            "not_yet_member",
            member(Side::Local, var("e")).not(),
        )]),
        effect: Arc::new(|state, call| {
            let mut entries = match state {
                StateValue::Record(fields) => match &fields[0] {
                    StateValue::Map(entries) => entries.clone(),
                    _ => panic!("gset members must be a map"),
                },
                _ => panic!("gset state must be a record"),
            };
            entries[call.id("e")] = StateValue::Flag(true);
            StateValue::Record(vec![StateValue::Map(entries)])
        }),
    };

    let leq = Predicate::binary(vec![(
        "subset",
        Expr::forall(
            "e",
            "elems",
            member(Side::Local, var("e")).implies(member(Side::Remote, var("e"))),
        ),
    )]);

    let merge = Arc::new(|a: &StateValue, b: &StateValue| {
        let entries = |s: &StateValue| match s {
            StateValue::Record(fields) => match &fields[0] {
                StateValue::Map(entries) => entries.clone(),
                _ => panic!("gset members must be a map"),
            },
            _ => panic!("gset state must be a record"),
        };
        let union: Vec<StateValue> = entries(a)
            .iter()
            .zip(entries(b).iter())
            .map(|(x, y)| match (x, y) {
                (StateValue::Flag(p), StateValue::Flag(q)) => StateValue::Flag(*p || *q),
                _ => panic!("gset members must be flags"),
            })
            .collect();
        StateValue::Record(vec![StateValue::Map(union)])
    });

    Ok(ObjectSpec {
        name: "gset".into(),
        schema,
        initial: Some(StateValue::Record(vec![StateValue::Map(vec![
            StateValue::Flag(false);
            elem_count
        ])])),
        leq: Some(leq),
        merge: Some(merge),
        operations: vec![add],
        pre_merge: Predicate::truth(crate::model::Arity::Binary),
        invariant: Predicate::truth(crate::model::Arity::Unary),
        static_maps: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_states, Binding};

    fn setup() -> (ObjectSpec, DomainBounds) {
        let mut bounds = DomainBounds::default();
        bounds.id_domains.insert("elems".into(), 3);
        let spec = make_gset(&bounds).expect("bounds cover the element domain");
        (spec, bounds)
    }

    fn set(members: [bool; 3]) -> StateValue {
        StateValue::Record(vec![StateValue::Map(
            members.iter().map(|&b| StateValue::Flag(b)).collect(),
        )])
    }

    fn add_arg(i: usize) -> Vec<(String, Binding)> {
        vec![("e".into(), Binding::Id(i))]
    }

    #[test]
    fn cardinality_is_two_to_the_elements() {
        let (spec, bounds) = setup();
        let space = enumerate_states(&spec.schema, &bounds).unwrap();
        assert_eq!(space.cardinality, 8);
    }

    #[test]
    fn add_flips_one_membership_flag() {
        let (spec, bounds) = setup();
        let next = spec
            .apply_op(&bounds, "add", &add_arg(1), 0, &set([true, false, false]))
            .unwrap();
        assert_eq!(next, set([true, true, false]));
    }

    #[test]
    fn adding_a_member_again_is_rejected() {
        let (spec, bounds) = setup();
        let err = spec
            .apply_op(&bounds, "add", &add_arg(0), 0, &set([true, false, false]))
            .unwrap_err();
        match err {
            ModelError::PreconditionViolated { op, clause } => {
                assert_eq!(op, "add");
                assert_eq!(clause, "not_yet_member");
            }
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
    }

    #[test]
    fn merge_is_union_and_order_is_inclusion() {
        let (spec, bounds) = setup();
        let a = set([true, false, false]);
        let b = set([false, false, true]);
        let merged = spec.merge_states(&bounds, &a, &b).unwrap();
        assert_eq!(merged, set([true, false, true]));
        assert!(spec.leq_states(&bounds, &a, &merged, 0).unwrap());
        assert!(spec.leq_states(&bounds, &b, &merged, 0).unwrap());
        assert!(!spec.leq_states(&bounds, &merged, &a, 0).unwrap());
    }
}
