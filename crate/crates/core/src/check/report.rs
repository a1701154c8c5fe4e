//! The check report: per-stage assertion outcomes, statistics, and fully
//! replayable counterexamples. The JSON form is `serde`-derived from these
//! structs; the CLI's text form is rendered from the same values, so the
//! two never disagree.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value as Json;

use crate::model::ClauseVerdict;

use super::config::CheckConfig;

/// The five pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStage {
    #[serde(rename = "wellformedness")]
    WellFormedness,
    Compliance,
    Convergence,
    SequentialSafety,
    ConcurrentSafety,
}

pub const ALL_STAGES: [CheckStage; 5] = [
    CheckStage::WellFormedness,
    CheckStage::Compliance,
    CheckStage::Convergence,
    CheckStage::SequentialSafety,
    CheckStage::ConcurrentSafety,
];

impl fmt::Display for CheckStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckStage::WellFormedness => "wellformedness",
            CheckStage::Compliance => "compliance",
            CheckStage::Convergence => "convergence",
            CheckStage::SequentialSafety => "sequential_safety",
            CheckStage::ConcurrentSafety => "concurrent_safety",
        };
        write!(f, "{s}")
    }
}

impl FromStr for CheckStage {
    type Err = String;

    fn from_str(s: &str) -> Result<CheckStage, String> {
        match s {
            "wellformedness" | "wf" => Ok(CheckStage::WellFormedness),
            "compliance" => Ok(CheckStage::Compliance),
            "convergence" => Ok(CheckStage::Convergence),
            "sequential_safety" | "sequential" => Ok(CheckStage::SequentialSafety),
            "concurrent_safety" | "concurrent" => Ok(CheckStage::ConcurrentSafety),
            other => Err(format!(
                "unknown stage `{other}` (expected wellformedness, compliance, convergence, \
                 sequential_safety or concurrent_safety)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// One state shown in a counterexample, under a stable role name
/// (`sigma`, `sigma_prime`, `sigma_second`, `sigma_star`, `post_op`,
/// `merged`, `initial`).
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub role: String,
    pub state: Json,
}

impl Witness {
    pub fn render(
        role: &str,
        spec: &crate::model::ObjectSpec,
        state: &crate::model::StateValue,
    ) -> Witness {
        Witness {
            role: role.into(),
            state: state.render(&spec.schema),
        }
    }
}

/// The operation instance a counterexample exercises.
#[derive(Debug, Clone, Serialize)]
pub struct OpRef {
    pub name: String,
    /// Arguments with reader-facing values (id element names, integers).
    pub args: serde_json::Map<String, Json>,
    /// The replica that runs it.
    pub origin: String,
}

impl OpRef {
    pub fn render(
        spec: &crate::model::ObjectSpec,
        _bounds: &crate::model::DomainBounds,
        op_idx: usize,
        args: &[(String, crate::model::Binding)],
        me: usize,
    ) -> OpRef {
        let op = &spec.operations[op_idx];
        let mut map = serde_json::Map::new();
        for (name, binding) in args {
            let value = match binding {
                crate::model::Binding::Id(i) => {
                    let domain = op
                        .params
                        .iter()
                        .find(|p| p.name == *name)
                        .and_then(|p| match &p.domain {
                            crate::model::ParamDomain::Id(d) => Some(d.as_str()),
                            crate::model::ParamDomain::Int { .. } => None,
                        });
                    match domain {
                        Some(d) => Json::String(spec.schema.elem_name(d, *i)),
                        None => Json::from(*i as u64),
                    }
                }
                crate::model::Binding::Int(v) => Json::from(*v),
            };
            map.insert(name.clone(), value);
        }
        OpRef {
            name: op.name.clone(),
            args: map,
            origin: crate::model::replica_name(me),
        }
    }
}

/// One predicate evaluation that a counterexample depends on: either a
/// recorded assumption (which held) or the failed assertion itself.
/// `states` lists witness roles in (local, remote) order for two-state
/// predicates. `me` is absent for replica-independent predicates.
#[derive(Debug, Clone, Serialize)]
pub struct PredicateCheck {
    /// `invariant`, `pre_merge`, `precondition`, `leq` or `state_equality`.
    pub predicate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub me: Option<String>,
    pub states: Vec<String>,
    pub holds: bool,
    /// Per-clause breakdown; populated for the failed assertion.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clauses: Vec<ClauseVerdict>,
}

impl PredicateCheck {
    /// An assumption that held when the counterexample was recorded.
    pub fn assumption(predicate: &str, me: Option<usize>, states: &[&str]) -> PredicateCheck {
        PredicateCheck {
            predicate: predicate.into(),
            me: me.map(crate::model::replica_name),
            states: states.iter().map(|s| s.to_string()).collect(),
            holds: true,
            clauses: Vec::new(),
        }
    }

    /// The failed assertion with its per-clause breakdown.
    pub fn failure(
        predicate: &str,
        me: Option<usize>,
        states: &[&str],
        clauses: Vec<ClauseVerdict>,
    ) -> PredicateCheck {
        PredicateCheck {
            predicate: predicate.into(),
            me: me.map(crate::model::replica_name),
            states: states.iter().map(|s| s.to_string()).collect(),
            holds: false,
            clauses,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub stage: CheckStage,
    pub assertion: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operation: Option<OpRef>,
    /// 1 = the operating replica merges the peer's state; 2 = the peer
    /// merges the post-operation state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<u8>,
    pub witnesses: Vec<Witness>,
    pub assumptions: Vec<PredicateCheck>,
    pub failed: PredicateCheck,
}

impl Counterexample {
    /// A structural finding with no state witnesses, used by the
    /// well-formedness and compliance stages.
    pub fn problem(stage: CheckStage, assertion: &str, check: &str, message: &str) -> Counterexample {
        Counterexample {
            stage,
            assertion: assertion.into(),
            operation: None,
            orientation: None,
            witnesses: Vec::new(),
            assumptions: Vec::new(),
            failed: PredicateCheck {
                predicate: "structure".into(),
                me: None,
                states: Vec::new(),
                holds: false,
                clauses: vec![ClauseVerdict {
                    name: check.into(),
                    text: message.into(),
                    holds: false,
                    note: None,
                }],
            },
        }
    }
}

/// How the checked tuples for one assertion were drawn.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleInfo {
    pub samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionReport {
    pub assertion: String,
    /// Present when the assertion is checked per operation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operation: Option<String>,
    /// Tuples for which all assumptions held and the assertion was
    /// evaluated.
    pub checked: u64,
    pub violations: u64,
    pub counterexamples: Vec<Counterexample>,
    /// True when more violations exist than recorded counterexamples.
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<SampleInfo>,
}

impl AssertionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Accumulates one assertion's outcome while a stage runs: every violation
/// is counted, but only the first `cap` counterexamples (in the stage's
/// canonical iteration order) are kept.
pub struct AssertionBuilder {
    assertion: String,
    operation: Option<String>,
    checked: u64,
    violations: u64,
    cap: usize,
    counterexamples: Vec<Counterexample>,
    sampled: Option<SampleInfo>,
}

impl AssertionBuilder {
    pub fn new(assertion: &str, operation: Option<&str>, cap: usize) -> AssertionBuilder {
        AssertionBuilder {
            assertion: assertion.into(),
            operation: operation.map(str::to_string),
            checked: 0,
            violations: 0,
            cap,
            counterexamples: Vec::new(),
            sampled: None,
        }
    }

    pub fn tick(&mut self) {
        self.checked += 1;
    }

    pub fn tick_by(&mut self, n: u64) {
        self.checked += n;
    }

    /// Counts a violation; returns true when a counterexample should still
    /// be recorded for it.
    pub fn note_violation(&mut self) -> bool {
        self.violations += 1;
        self.counterexamples.len() < self.cap
    }

    pub fn record(&mut self, cex: Counterexample) {
        self.counterexamples.push(cex);
    }

    pub fn set_sampled(&mut self, info: SampleInfo) {
        self.sampled = Some(info);
    }

    pub fn finish(self) -> AssertionReport {
        let truncated = self.violations > self.counterexamples.len() as u64;
        AssertionReport {
            assertion: self.assertion,
            operation: self.operation,
            checked: self.checked,
            violations: self.violations,
            counterexamples: self.counterexamples,
            truncated,
            sampled: self.sampled,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: CheckStage,
    pub verdict: Verdict,
    pub assertions: Vec<AssertionReport>,
    pub warnings: Vec<String>,
}

impl StageReport {
    pub fn skipped(stage: CheckStage) -> StageReport {
        StageReport {
            stage,
            verdict: Verdict::Skipped,
            assertions: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn from_assertions(stage: CheckStage, assertions: Vec<AssertionReport>) -> StageReport {
        let verdict = if assertions.iter().all(AssertionReport::passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        StageReport {
            stage,
            verdict,
            assertions,
            warnings: Vec::new(),
        }
    }

    pub fn assertion(&self, id: &str) -> Option<&AssertionReport> {
        self.assertions.iter().find(|a| a.assertion == id)
    }

    pub fn assertion_for(&self, id: &str, operation: &str) -> Option<&AssertionReport> {
        self.assertions
            .iter()
            .find(|a| a.assertion == id && a.operation.as_deref() == Some(operation))
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CheckStats {
    /// Size of the enumerated raw state space.
    pub states_enumerated: u64,
    /// States satisfying the invariant.
    pub valid_states: u64,
    /// (me, σ, σ′) tuples with both states valid and `Pre_merge(σ, σ′)`.
    pub valid_pairs: u64,
    /// Merge-preservation triples actually evaluated.
    pub triples_checked: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub version: String,
    pub spec: String,
    pub bounds: crate::model::DomainBounds,
    pub config: CheckConfig,
    /// Standing caveat: verdicts are exhaustive within the stated bounds
    /// and say nothing beyond them.
    pub scope: String,
    pub stages: Vec<StageReport>,
    pub stats: CheckStats,
    pub verdict: Verdict,
}

pub const SCOPE_NOTE: &str =
    "verdicts are exhaustive over the stated bounds only; larger domains may behave differently";

impl CheckReport {
    pub fn stage(&self, stage: CheckStage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// All recorded counterexamples across stages, in report order.
    pub fn counterexamples(&self) -> impl Iterator<Item = &Counterexample> {
        self.stages
            .iter()
            .flat_map(|s| s.assertions.iter())
            .flat_map(|a| a.counterexamples.iter())
    }
}
