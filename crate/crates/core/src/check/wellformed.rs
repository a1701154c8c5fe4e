//! Stage 1: structural validity. Bounds and schema sanity, identifier
//! resolution inside every predicate, parameter domains, and the initial
//! state's shape. Also scans for operations that can never run within the
//! bounds and reports them as warnings — a dead operation is suspicious
//! but not unsound.

use crate::model::{
    enumerate_states, validate_predicate, DomainBounds, EvalCtx, ModelError, ObjectSpec,
    ParamDomain,
};

use super::config::CheckConfig;
use super::context::predicate_references_me;
use super::report::{AssertionBuilder, CheckStage, Counterexample, StageReport};

const STAGE: CheckStage = CheckStage::WellFormedness;

pub fn run(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
) -> Result<StageReport, ModelError> {
    let cap = config.max_counterexamples_per_assertion;

    // wf.schema: bounds, component schema, static id maps.
    let mut schema = AssertionBuilder::new("wf.schema", None, cap);
    let problem = |b: &mut AssertionBuilder, assertion: &str, check: &str, msg: &str| {
        if b.note_violation() {
            b.record(Counterexample::problem(STAGE, assertion, check, msg));
        }
    };
    schema.tick();
    if let Err(e) = bounds.validate() {
        problem(&mut schema, "wf.schema", "bounds", &e.to_string());
    }
    schema.tick();
    if let Err(e) = spec.schema.validate(bounds) {
        problem(&mut schema, "wf.schema", "components", &e.to_string());
    }
    for (name, map) in &spec.static_maps {
        schema.tick();
        let from = bounds.domain_size(&map.from_domain);
        let to = bounds.domain_size(&map.to_domain);
        match (from, to) {
            (Err(e), _) | (_, Err(e)) => {
                problem(&mut schema, "wf.schema", name, &e.to_string());
            }
            (Ok(from), Ok(to)) => {
                if map.table.len() != from {
                    problem(
                        &mut schema,
                        "wf.schema",
                        name,
                        &format!(
                            "static map `{name}` has {} entries but `{}` has {from} elements",
                            map.table.len(),
                            map.from_domain
                        ),
                    );
                } else if let Some(bad) = map.table.iter().find(|&&t| t >= to) {
                    problem(
                        &mut schema,
                        "wf.schema",
                        name,
                        &format!(
                            "static map `{name}` points at element {bad} of `{}`, which has only \
                             {to} elements",
                            map.to_domain
                        ),
                    );
                }
            }
        }
    }

    // wf.initial_state: the declared initial state fits the schema.
    // Absence is a compliance finding, not a shape error.
    let mut initial = AssertionBuilder::new("wf.initial_state", None, cap);
    if let Some(init) = &spec.initial {
        initial.tick();
        if let Err(e) = init.conforms(&spec.schema, bounds) {
            problem(&mut initial, "wf.initial_state", "initial", &e.to_string());
        }
    }

    // wf.identifiers: every predicate only names declared components,
    // domains, parameters and binders; the invariant and the comparison
    // must be replica-independent.
    let mut identifiers = AssertionBuilder::new("wf.identifiers", None, cap);
    identifiers.tick();
    if let Err(e) = validate_predicate(spec, bounds, &spec.invariant, &[], "invariant") {
        problem(&mut identifiers, "wf.identifiers", "invariant", &e.to_string());
    }
    if predicate_references_me(&spec.invariant) {
        problem(
            &mut identifiers,
            "wf.identifiers",
            "invariant",
            "the invariant may not reference `me`; it must hold identically at every replica",
        );
    }
    if let Some(leq) = &spec.leq {
        identifiers.tick();
        if let Err(e) = validate_predicate(spec, bounds, leq, &[], "comparison") {
            problem(&mut identifiers, "wf.identifiers", "leq", &e.to_string());
        }
        if predicate_references_me(leq) {
            problem(
                &mut identifiers,
                "wf.identifiers",
                "leq",
                "the comparison may not reference `me`; the order must be replica-independent",
            );
        }
    }
    identifiers.tick();
    if let Err(e) = validate_predicate(spec, bounds, &spec.pre_merge, &[], "merge precondition") {
        problem(&mut identifiers, "wf.identifiers", "pre_merge", &e.to_string());
    }
    for op in &spec.operations {
        identifiers.tick();
        let context = format!("precondition of `{}`", op.name);
        if let Err(e) = validate_predicate(spec, bounds, &op.precondition, &op.params, &context) {
            problem(&mut identifiers, "wf.identifiers", &op.name, &e.to_string());
        }
    }

    // wf.param_domains: every operation parameter ranges over a known,
    // nonempty domain description.
    let mut params = AssertionBuilder::new("wf.param_domains", None, cap);
    for op in &spec.operations {
        for p in &op.params {
            params.tick();
            let check = format!("{}.{}", op.name, p.name);
            match &p.domain {
                ParamDomain::Id(domain) => {
                    if let Err(e) = bounds.domain_size(domain) {
                        problem(&mut params, "wf.param_domains", &check, &e.to_string());
                    }
                }
                ParamDomain::Int { min, max } => {
                    if min > max {
                        problem(
                            &mut params,
                            "wf.param_domains",
                            &check,
                            &format!("parameter `{}` ranges over the empty set {min}..={max}", p.name),
                        );
                    }
                }
            }
        }
    }

    let assertions = vec![
        schema.finish(),
        initial.finish(),
        identifiers.finish(),
        params.finish(),
    ];
    let clean = assertions.iter().all(|a| a.passed());
    let mut report = StageReport::from_assertions(STAGE, assertions);

    // Dead-operation scan: only meaningful once the structure is sound.
    if clean {
        report.warnings = dead_operation_warnings(spec, bounds)?;
    }
    Ok(report)
}

/// Finds operations with no instances, or whose precondition is false at
/// every (raw state, instance, replica) combination within the bounds.
fn dead_operation_warnings(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
) -> Result<Vec<String>, ModelError> {
    if spec.operations.is_empty() {
        return Ok(Vec::new());
    }
    let space = enumerate_states(&spec.schema, bounds)?;
    let instances = spec.op_instances(bounds)?;
    let mut warnings = Vec::new();
    for (op_idx, op) in spec.operations.iter().enumerate() {
        let mine: Vec<_> = instances.iter().filter(|(i, _)| *i == op_idx).collect();
        if mine.is_empty() {
            warnings.push(format!(
                "operation `{}` has no instances within the stated bounds",
                op.name
            ));
            continue;
        }
        let mut enabled = false;
        'scan: for (_, args) in &mine {
            for me in 0..bounds.replica_count {
                for state in &space.states {
                    if EvalCtx::unary(spec, bounds, state, me, args).holds(&op.precondition)? {
                        enabled = true;
                        break 'scan;
                    }
                }
            }
        }
        if !enabled {
            warnings.push(format!(
                "operation `{}` is never enabled: its precondition is unsatisfiable over every \
                 enumerated state, instance and replica",
                op.name
            ));
        }
    }
    Ok(warnings)
}
