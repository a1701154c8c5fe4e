//! Concrete execution over an unreliable network: replicas apply guarded
//! operations locally and exchange full-state snapshots that can be
//! delayed, dropped, duplicated or reordered. Where the checker quantifies
//! over all bounded states, the simulator walks specific traces — useful
//! for demonstrating a flagged defect end-to-end and for convergence
//! smoke-testing with seeded random walks.

mod builtin;
mod engine;
mod scenario;

pub use builtin::{all_scenarios, find_scenario, BuiltinScenario};
pub use engine::{
    run_random, run_scenario, RandomConfig, SimReport, Simulator, TraceAction, TraceEntry,
};
pub use scenario::{apply_bounds, Policy, Scenario, ScenarioEvent};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown built-in spec `{0}`")]
    UnknownSpec(String),
    #[error("message `{0}` is not in flight")]
    UnknownMessage(String),
    #[error("message id `{0}` is already in flight")]
    MessageIdInUse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
