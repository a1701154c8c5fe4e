//! Checker configuration. Everything here is echoed into the report (so a
//! report is self-describing) except the worker count, which cannot change
//! any result.

use serde::Serialize;

use super::report::CheckStage;

/// How the leastness law quantifies its upper-bound candidates σ*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeastnessMode {
    /// Exhaustive when the candidate count fits the exhaustive budget,
    /// otherwise sampled with the default sample count and seed.
    Auto,
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_SAMPLE_SEED: u64 = 42;

/// Shape of the merge-preservation obligation in the concurrent stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePreservation {
    /// Merge two states (pairwise compatible with a third) and require the
    /// result to stay mergeable with that third state.
    ThreeState,
    /// Merge two compatible states and require the result to stay
    /// mergeable with one of them.
    TwoState,
}

/// Which stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageSelection {
    All,
    /// Exactly one stage, skipping its usual prerequisites.
    Only(CheckStage),
}

impl StageSelection {
    pub fn includes(&self, stage: CheckStage) -> bool {
        match self {
            StageSelection::All => true,
            StageSelection::Only(only) => *only == stage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub stages: StageSelection,
    /// Skip the remaining stages once one fails.
    pub stop_on_first_failure: bool,
    /// Cap on recorded counterexamples per (assertion, operation) bucket;
    /// violations are always counted in full.
    pub max_counterexamples_per_assertion: usize,
    pub leastness: LeastnessMode,
    /// Also check that operations preserve the merge precondition in the
    /// reverse direction (a peer merging the post-operation state).
    pub check_both_pre_merge_orientations: bool,
    pub merge_preservation: MergePreservation,
    /// Work cap (assertion evaluations) above which `Auto` leastness and
    /// triple enumeration fall back to sampling.
    pub exhaustive_budget: u64,
    /// Also evaluate the order laws over the raw (invariant-free) domain
    /// and report failures as informational warnings.
    pub informational_raw_laws: bool,
    /// Worker threads for the precomputed tables; 0 means the default.
    /// Deliberately not serialized: results never depend on it.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            stages: StageSelection::All,
            stop_on_first_failure: true,
            max_counterexamples_per_assertion: 3,
            leastness: LeastnessMode::Auto,
            check_both_pre_merge_orientations: true,
            merge_preservation: MergePreservation::ThreeState,
            exhaustive_budget: 20_000_000,
            informational_raw_laws: true,
            jobs: 0,
        }
    }
}
