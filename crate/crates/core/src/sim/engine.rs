//! The event-loop simulator. Replicas hold concrete states; messages are
//! full-state snapshots taken at send time; every state change re-checks
//! the invariant and records the step. Delivery always merges — a replica
//! cannot refuse anti-entropy — but the merge precondition is evaluated
//! first and a failure is noted, since that is exactly the contract the
//! checker proves operations cannot break.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value as Json;

use crate::model::{
    parse_replica, replica_name, Binding, DomainBounds, EvalCtx, ModelError, ObjectSpec,
    StateValue,
};

use super::scenario::{Policy, Scenario, ScenarioEvent};
use super::SimError;

/// What one trace step did, in structured form; the CLI renders text from
/// this, JSON output serializes it as-is.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceAction {
    Invoke {
        replica: String,
        op: String,
        args: serde_json::Map<String, Json>,
        applied: bool,
    },
    Send {
        id: String,
        from: String,
        to: String,
    },
    Deliver {
        id: String,
        from: String,
        to: String,
    },
    Drop {
        id: String,
    },
    Duplicate {
        of: String,
        id: String,
    },
    /// A direct anti-entropy merge (snapshot now, merge now).
    Sync {
        from: String,
        to: String,
    },
    CheckInvariant {
        failing: Vec<String>,
    },
    CheckConverged {
        converged: bool,
        distinct_states: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub step: usize,
    #[serde(flatten)]
    pub action: TraceAction,
    /// The replica whose state the action touched, with its state before
    /// and after, for actions that can change state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replica: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub before: Option<Json>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<Json>,
    /// Invariant verdict at the touched replica after the action.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant_holds: Option<bool>,
    /// Irregularities: rejected preconditions, failed invariant clauses,
    /// a failed merge precondition at delivery, non-inflationary moves.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub spec: String,
    pub bounds: DomainBounds,
    pub policy: Policy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub steps: u64,
    pub invocations: u64,
    /// Invokes whose precondition rejected them.
    pub rejections: u64,
    /// State-changing steps that broke the invariant.
    pub violations: u64,
    /// Deliveries whose merge precondition did not hold.
    pub pre_merge_failures: u64,
    /// Outcome of the last convergence check, if any ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Set when the halt policy stopped the run early.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halted: Option<String>,
    /// No invariant violation and no failed check anywhere in the trace.
    pub clean: bool,
    pub trace: Vec<TraceEntry>,
    pub final_states: BTreeMap<String, Json>,
}

struct Message {
    from: usize,
    to: usize,
    snapshot: StateValue,
}

pub struct Simulator<'a> {
    spec: &'a ObjectSpec,
    bounds: &'a DomainBounds,
    policy: Policy,
    states: Vec<StateValue>,
    in_flight: BTreeMap<String, Message>,
    trace: Vec<TraceEntry>,
    step: usize,
    invocations: u64,
    rejections: u64,
    violations: u64,
    pre_merge_failures: u64,
    converged: Option<bool>,
    halted: Option<String>,
    checks_failed: bool,
}

impl<'a> Simulator<'a> {
    pub fn new(
        spec: &'a ObjectSpec,
        bounds: &'a DomainBounds,
        policy: Policy,
    ) -> Result<Simulator<'a>, SimError> {
        spec.require_complete()?;
        bounds.validate()?;
        let initial = spec.initial_state()?;
        initial.conforms(&spec.schema, bounds)?;
        Ok(Simulator {
            spec,
            bounds,
            policy,
            states: vec![initial.clone(); bounds.replica_count],
            in_flight: BTreeMap::new(),
            trace: Vec::new(),
            step: 0,
            invocations: 0,
            rejections: 0,
            violations: 0,
            pre_merge_failures: 0,
            converged: None,
            halted: None,
            checks_failed: false,
        })
    }

    pub fn halted(&self) -> bool {
        self.halted.is_some()
    }

    fn render(&self, state: &StateValue) -> Json {
        state.render(&self.spec.schema)
    }

    fn push(&mut self, entry: TraceEntry) {
        self.trace.push(entry);
        self.step += 1;
    }

    fn entry(&self, action: TraceAction) -> TraceEntry {
        TraceEntry {
            step: self.step,
            action,
            replica: None,
            before: None,
            after: None,
            invariant_holds: None,
            notes: Vec::new(),
        }
    }

    /// Invariant clauses failing at `state`, as `name (note)` strings.
    fn failing_clauses(&self, state: &StateValue) -> Result<Vec<String>, ModelError> {
        let v = EvalCtx::unary(self.spec, self.bounds, state, 0, &[]).verdict(&self.spec.invariant)?;
        Ok(v.clauses
            .iter()
            .filter(|c| !c.holds)
            .map(|c| match &c.note {
                Some(note) => format!("{} ({note})", c.name),
                None => c.name.clone(),
            })
            .collect())
    }

    /// Applies a state transition at one replica, recording before/after,
    /// the invariant verdict, and inflation.
    fn transition(
        &mut self,
        mut entry: TraceEntry,
        replica: usize,
        next: StateValue,
    ) -> Result<(), SimError> {
        let before = &self.states[replica];
        entry.replica = Some(replica_name(replica));
        entry.before = Some(self.render(before));
        entry.after = Some(self.render(&next));
        if !self.spec.leq_states(self.bounds, before, &next, replica)? {
            entry.notes.push("non-inflationary transition".into());
        }
        let failing = self.failing_clauses(&next)?;
        entry.invariant_holds = Some(failing.is_empty());
        if !failing.is_empty() {
            self.violations += 1;
            entry
                .notes
                .push(format!("invariant violated: {}", failing.join(", ")));
            if self.policy == Policy::Halt {
                self.halted = Some(format!(
                    "step {}: invariant violated at {}",
                    self.step,
                    replica_name(replica)
                ));
            }
        }
        self.states[replica] = next;
        self.push(entry);
        Ok(())
    }

    pub fn invoke(
        &mut self,
        replica: usize,
        op_name: &str,
        args: &[(String, Binding)],
    ) -> Result<(), SimError> {
        self.invocations += 1;
        let op_idx = self
            .spec
            .operations
            .iter()
            .position(|op| op.name == op_name)
            .ok_or_else(|| ModelError::UnknownOperation(op_name.into()))?;
        let action = TraceAction::Invoke {
            replica: replica_name(replica),
            op: op_name.into(),
            args: render_args(self.spec, op_idx, args),
            applied: true,
        };
        let mut entry = self.entry(action);
        match self
            .spec
            .apply_op(self.bounds, op_name, args, replica, &self.states[replica])
        {
            Ok(next) => self.transition(entry, replica, next),
            Err(ModelError::PreconditionViolated { op, clause }) => {
                self.rejections += 1;
                if let TraceAction::Invoke { applied, .. } = &mut entry.action {
                    *applied = false;
                }
                entry
                    .notes
                    .push(format!("rejected: precondition clause `{clause}` of `{op}` does not hold"));
                if self.policy == Policy::Halt {
                    self.halted = Some(format!(
                        "step {}: `{op}` rejected at {}",
                        self.step,
                        replica_name(replica)
                    ));
                }
                self.push(entry);
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn send(&mut self, from: usize, to: usize, id: &str) -> Result<(), SimError> {
        if self.in_flight.contains_key(id) {
            return Err(SimError::MessageIdInUse(id.into()));
        }
        self.in_flight.insert(
            id.into(),
            Message {
                from,
                to,
                snapshot: self.states[from].clone(),
            },
        );
        let entry = self.entry(TraceAction::Send {
            id: id.into(),
            from: replica_name(from),
            to: replica_name(to),
        });
        self.push(entry);
        Ok(())
    }

    pub fn deliver(&mut self, id: &str) -> Result<(), SimError> {
        let msg = self
            .in_flight
            .remove(id)
            .ok_or_else(|| SimError::UnknownMessage(id.into()))?;
        let action = TraceAction::Deliver {
            id: id.into(),
            from: replica_name(msg.from),
            to: replica_name(msg.to),
        };
        let entry = self.entry(action);
        self.merge_into(entry, msg.to, &msg.snapshot)
    }

    /// Merges a remote snapshot into `to`. The merge precondition is the
    /// contract being watched, not a gate: a failure is recorded and the
    /// merge still happens, because convergent replication cannot decline
    /// state it receives.
    fn merge_into(
        &mut self,
        mut entry: TraceEntry,
        to: usize,
        snapshot: &StateValue,
    ) -> Result<(), SimError> {
        let pm_holds = EvalCtx::binary(self.spec, self.bounds, &self.states[to], snapshot, to, &[])
            .holds(&self.spec.pre_merge)?;
        if !pm_holds {
            self.pre_merge_failures += 1;
            entry.notes.push("merge precondition does not hold".into());
        }
        let next = self
            .spec
            .merge_states(self.bounds, &self.states[to], snapshot)?;
        self.transition(entry, to, next)
    }

    pub fn drop_message(&mut self, id: &str) -> Result<(), SimError> {
        if self.in_flight.remove(id).is_none() {
            return Err(SimError::UnknownMessage(id.into()));
        }
        let entry = self.entry(TraceAction::Drop { id: id.into() });
        self.push(entry);
        Ok(())
    }

    pub fn duplicate(&mut self, of: &str, id: &str) -> Result<(), SimError> {
        if self.in_flight.contains_key(id) {
            return Err(SimError::MessageIdInUse(id.into()));
        }
        let original = self
            .in_flight
            .get(of)
            .ok_or_else(|| SimError::UnknownMessage(of.into()))?;
        let copy = Message {
            from: original.from,
            to: original.to,
            snapshot: original.snapshot.clone(),
        };
        self.in_flight.insert(id.into(), copy);
        let entry = self.entry(TraceAction::Duplicate {
            of: of.into(),
            id: id.into(),
        });
        self.push(entry);
        Ok(())
    }

    pub fn check_invariant_all(&mut self) -> Result<(), SimError> {
        let mut failing = Vec::new();
        for (r, state) in self.states.iter().enumerate() {
            for clause in self.failing_clauses(state)? {
                failing.push(format!("{}: {clause}", replica_name(r)));
            }
        }
        if !failing.is_empty() {
            self.checks_failed = true;
            if self.policy == Policy::Halt {
                self.halted = Some(format!("step {}: invariant check failed", self.step));
            }
        }
        let entry = self.entry(TraceAction::CheckInvariant { failing });
        self.push(entry);
        Ok(())
    }

    pub fn check_converged(&mut self) {
        let mut distinct: Vec<&StateValue> = Vec::new();
        for state in &self.states {
            if !distinct.contains(&state) {
                distinct.push(state);
            }
        }
        let converged = distinct.len() <= 1;
        self.converged = Some(converged);
        if !converged {
            self.checks_failed = true;
            if self.policy == Policy::Halt {
                self.halted = Some(format!("step {}: replicas have not converged", self.step));
            }
        }
        let entry = self.entry(TraceAction::CheckConverged {
            converged,
            distinct_states: distinct.len(),
        });
        self.push(entry);
    }

    /// Direct pairwise anti-entropy: `rounds` passes over every ordered
    /// replica pair, each snapshotting the sender's current state and
    /// merging it immediately.
    pub fn anti_entropy(&mut self, rounds: usize) -> Result<(), SimError> {
        for _ in 0..rounds {
            for from in 0..self.bounds.replica_count {
                for to in 0..self.bounds.replica_count {
                    if from == to {
                        continue;
                    }
                    if self.halted() {
                        return Ok(());
                    }
                    let entry = self.entry(TraceAction::Sync {
                        from: replica_name(from),
                        to: replica_name(to),
                    });
                    let snapshot = self.states[from].clone();
                    self.merge_into(entry, to, &snapshot)?;
                }
            }
        }
        Ok(())
    }

    pub fn apply_event(&mut self, event: &ScenarioEvent) -> Result<(), SimError> {
        match event {
            ScenarioEvent::Invoke { replica, op, params } => {
                let me = parse_replica(replica, self.bounds.replica_count)?;
                let args = self.spec.parse_args(self.bounds, op, params)?;
                self.invoke(me, op, &args)
            }
            ScenarioEvent::Send { from, to, id } => {
                let from = parse_replica(from, self.bounds.replica_count)?;
                let to = parse_replica(to, self.bounds.replica_count)?;
                self.send(from, to, id)
            }
            ScenarioEvent::Deliver(id) => self.deliver(id),
            ScenarioEvent::Drop(id) => self.drop_message(id),
            ScenarioEvent::Duplicate { of, id } => self.duplicate(of, id),
            ScenarioEvent::CheckInvariantAll {} => self.check_invariant_all(),
            ScenarioEvent::CheckConverged {} => {
                self.check_converged();
                Ok(())
            }
        }
    }

    pub fn finish(self, seed: Option<u64>) -> SimReport {
        let clean = self.violations == 0 && !self.checks_failed;
        let final_states = self
            .states
            .iter()
            .enumerate()
            .map(|(r, s)| (replica_name(r), s.render(&self.spec.schema)))
            .collect();
        SimReport {
            spec: self.spec.name.clone(),
            bounds: self.bounds.clone(),
            policy: self.policy,
            seed,
            steps: self.trace.len() as u64,
            invocations: self.invocations,
            rejections: self.rejections,
            violations: self.violations,
            pre_merge_failures: self.pre_merge_failures,
            converged: self.converged,
            halted: self.halted,
            clean,
            trace: self.trace,
            final_states,
        }
    }
}

fn render_args(
    spec: &ObjectSpec,
    op_idx: usize,
    args: &[(String, Binding)],
) -> serde_json::Map<String, Json> {
    // Reuse the counterexample arg renderer: same reader-facing values.
    crate::check::OpRef::render(spec, &DomainBounds::default(), op_idx, args, 0).args
}

/// Runs a parsed scenario to completion (or until the halt policy fires).
pub fn run_scenario(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    scenario: &Scenario,
) -> Result<SimReport, SimError> {
    let mut sim = Simulator::new(spec, bounds, scenario.policy)?;
    for event in &scenario.events {
        if sim.halted() {
            break;
        }
        sim.apply_event(event)?;
    }
    Ok(sim.finish(None))
}

/// Knobs for a randomized run.
#[derive(Debug, Clone, Copy)]
pub struct RandomConfig {
    pub seed: u64,
    pub steps: u64,
    /// Probability a sent message is dropped on the floor.
    pub drop_probability: f64,
    /// Probability a sent message is duplicated in flight.
    pub duplicate_probability: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            seed: 0,
            steps: 200,
            drop_probability: 0.3,
            duplicate_probability: 0.2,
        }
    }
}

/// A seeded random walk: each step invokes an enabled operation at a
/// random replica, sends a snapshot (which fate may drop or duplicate), or
/// delivers a random in-flight message. The walk always finishes with
/// full anti-entropy and a convergence check, so a passing run is a
/// witnessed convergence certificate for that seed.
pub fn run_random(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    policy: Policy,
    cfg: &RandomConfig,
) -> Result<SimReport, SimError> {
    let mut sim = Simulator::new(spec, bounds, policy)?;
    let instances = spec.op_instances(bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_msg = 0u64;
    let replicas = bounds.replica_count;

    for _ in 0..cfg.steps {
        if sim.halted() {
            break;
        }
        match rng.gen_range(0..3u8) {
            0 => {
                // Invoke: only operations whose precondition holds are
                // candidates; a replica with nothing enabled idles.
                let me = rng.gen_range(0..replicas);
                let mut enabled = Vec::new();
                for (op_idx, args) in &instances {
                    let op = &spec.operations[*op_idx];
                    if EvalCtx::unary(spec, bounds, &sim.states[me], me, args)
                        .holds(&op.precondition)?
                    {
                        enabled.push((op.name.clone(), args.clone()));
                    }
                }
                if !enabled.is_empty() {
                    let (name, args) = &enabled[rng.gen_range(0..enabled.len())];
                    sim.invoke(me, name, args)?;
                }
            }
            1 => {
                if replicas < 2 {
                    continue;
                }
                let from = rng.gen_range(0..replicas);
                let mut to = rng.gen_range(0..replicas - 1);
                if to >= from {
                    to += 1;
                }
                let id = format!("m{next_msg}");
                next_msg += 1;
                sim.send(from, to, &id)?;
                let fate: f64 = rng.gen();
                if fate < cfg.drop_probability {
                    sim.drop_message(&id)?;
                } else if fate < cfg.drop_probability + cfg.duplicate_probability {
                    let copy = format!("m{next_msg}");
                    next_msg += 1;
                    sim.duplicate(&id, &copy)?;
                }
            }
            _ => {
                if sim.in_flight.is_empty() {
                    continue;
                }
                let ids: Vec<String> = sim.in_flight.keys().cloned().collect();
                let id = &ids[rng.gen_range(0..ids.len())];
                sim.deliver(id)?;
            }
        }
    }

    if !sim.halted() {
        sim.anti_entropy(replicas)?;
        sim.check_invariant_all()?;
        sim.check_converged();
    }
    Ok(sim.finish(Some(cfg.seed)))
}
