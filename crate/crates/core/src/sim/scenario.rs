//! Scenario descriptions: a named built-in object, optional bound
//! overrides, a disruption policy, and a list of events to run in order.
//! Scenarios are plain JSON so regressions can be committed as files and
//! replayed byte-for-byte.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::model::{DomainBounds, ModelError};
use crate::specs::{apply_bound, find_builtin};

use super::SimError;

/// What to do when an invoked operation's precondition fails or a state
/// stops satisfying the invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Stop the run at the offending step.
    Halt,
    /// Record the event in the trace and keep going; a rejected invoke
    /// leaves the state untouched.
    #[default]
    SkipAndRecord,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioEvent {
    /// Run an operation at one replica.
    Invoke {
        replica: String,
        op: String,
        #[serde(default)]
        params: serde_json::Map<String, Json>,
    },
    /// Snapshot `from`'s current state into an in-flight message.
    Send { from: String, to: String, id: String },
    /// Merge an in-flight message into its destination.
    Deliver(String),
    /// Discard an in-flight message.
    Drop(String),
    /// Clone an in-flight message under a new id (a resend or a routing
    /// duplicate); both copies stay deliverable.
    Duplicate { of: String, id: String },
    /// Evaluate the invariant at every replica and record verdicts.
    CheckInvariantAll {},
    /// Record whether all replicas currently hold equal states.
    CheckConverged {},
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Name of a built-in object (`pair_counter`, `gset`, `auction_safe`,
    /// `auction_unsafe`).
    pub spec: String,
    /// Bound overrides by name, e.g. `{"replicas": 3, "bids": 2}`.
    #[serde(default)]
    pub bounds: serde_json::Map<String, Json>,
    #[serde(default)]
    pub policy: Policy,
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Resolves the named built-in with this scenario's bound overrides.
    pub fn resolve(&self) -> Result<(crate::model::ObjectSpec, DomainBounds), SimError> {
        let builtin =
            find_builtin(&self.spec).ok_or_else(|| SimError::UnknownSpec(self.spec.clone()))?;
        let mut bounds = builtin.default_bounds();
        apply_bounds(&mut bounds, &self.bounds)?;
        let spec = builtin.build(&bounds)?;
        Ok((spec, bounds))
    }
}

/// Applies JSON bound overrides (`{"replicas": 3}`) onto defaults.
pub fn apply_bounds(
    bounds: &mut DomainBounds,
    overrides: &serde_json::Map<String, Json>,
) -> Result<(), ModelError> {
    for (key, value) in overrides {
        let v = value.as_i64().ok_or_else(|| {
            ModelError::BadBounds(format!("bound `{key}` must be an integer, got {value}"))
        })?;
        apply_bound(bounds, key, v)?;
    }
    Ok(())
}
