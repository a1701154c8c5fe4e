//! Stage 2: completeness. A replicated object must supply an initial
//! state, a comparison, a merge function and at least one operation; the
//! invariant and the merge precondition are allowed to be constant true,
//! so their absence is never a finding.

use crate::model::ObjectSpec;

use super::config::CheckConfig;
use super::report::{AssertionBuilder, CheckStage, Counterexample, StageReport};

const STAGE: CheckStage = CheckStage::Compliance;

pub fn run(spec: &ObjectSpec, config: &CheckConfig) -> StageReport {
    let cap = config.max_counterexamples_per_assertion;
    let parts: [(&str, bool, &str); 4] = [
        (
            "compliance.missing_initial",
            spec.initial.is_some(),
            "no initial state is defined",
        ),
        (
            "compliance.missing_leq",
            spec.leq.is_some(),
            "no comparison (`leq`) is defined",
        ),
        (
            "compliance.missing_merge",
            spec.merge.is_some(),
            "no merge function is defined",
        ),
        (
            "compliance.missing_operations",
            !spec.operations.is_empty(),
            "no operations are declared",
        ),
    ];
    let assertions = parts
        .into_iter()
        .map(|(assertion, present, message)| {
            let mut b = AssertionBuilder::new(assertion, None, cap);
            b.tick();
            if !present && b.note_violation() {
                b.record(Counterexample::problem(STAGE, assertion, "completeness", message));
            }
            b.finish()
        })
        .collect();
    StageReport::from_assertions(STAGE, assertions)
}
