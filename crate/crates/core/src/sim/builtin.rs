//! Ready-made scenarios. `fig1_auction` plays out the classic anomaly:
//! one replica closes an auction while a higher concurrent bid is still
//! in flight, so the closed state later absorbs a bid above its winner.
//! Against `auction_unsafe` it ends in a visible invariant violation;
//! against `auction_safe` the close is rejected because bid tokens are
//! still outstanding. `token_release_close` shows the guarded protocol
//! succeeding: release every token first, then close.

use serde_json::{json, Value as Json};

use super::scenario::{Policy, Scenario, ScenarioEvent};

pub struct BuiltinScenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn() -> Scenario,
}

const SCENARIOS: &[BuiltinScenario] = &[
    BuiltinScenario {
        name: "fig1_auction",
        summary: "a lost higher bid arrives after the auction closed around it",
        build: fig1_auction,
    },
    BuiltinScenario {
        name: "token_release_close",
        summary: "the token handshake: bid, release every token, then close",
        build: token_release_close,
    },
];

pub fn all_scenarios() -> &'static [BuiltinScenario] {
    SCENARIOS
}

pub fn find_scenario(name: &str) -> Option<&'static BuiltinScenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

fn invoke(replica: &str, op: &str, params: &[(&str, Json)]) -> ScenarioEvent {
    ScenarioEvent::Invoke {
        replica: replica.into(),
        op: op.into(),
        params: params
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    }
}

fn send(from: &str, to: &str, id: &str) -> ScenarioEvent {
    ScenarioEvent::Send {
        from: from.into(),
        to: to.into(),
        id: id.into(),
    }
}

fn deliver(id: &str) -> ScenarioEvent {
    ScenarioEvent::Deliver(id.into())
}

fn drop_msg(id: &str) -> ScenarioEvent {
    ScenarioEvent::Drop(id.into())
}

fn bounds(pairs: &[(&str, i64)]) -> serde_json::Map<String, Json> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), Json::from(*v)))
        .collect()
}

/// Three replicas: r3 runs the auction, r1 bids low, r2 bids high but its
/// update is lost; r3 closes around the lower bid, and the high bid —
/// resent before r2 learns of the closure — lands afterwards.
fn fig1_auction() -> Scenario {
    Scenario {
        spec: "auction_unsafe".into(),
        bounds: bounds(&[("replicas", 3), ("bids", 2), ("amount_max", 2)]),
        policy: Policy::SkipAndRecord,
        events: vec![
            invoke("r3", "start_auction", &[]),
            send("r3", "r1", "m1"),
            send("r3", "r2", "m2"),
            deliver("m1"),
            deliver("m2"),
            invoke("r1", "place_bid", &[("b", json!("b1")), ("value", json!(1))]),
            send("r1", "r3", "m3"),
            deliver("m3"),
            send("r1", "r2", "m4"),
            deliver("m4"),
            invoke("r2", "place_bid", &[("b", json!("b2")), ("value", json!(2))]),
            send("r2", "r3", "m5"),
            drop_msg("m5"),
            invoke("r3", "close_auction", &[("w", json!("b1"))]),
            // r2 resends its pre-closure state while the closure is still
            // propagating.
            send("r2", "r3", "m8"),
            send("r3", "r1", "m6"),
            deliver("m6"),
            send("r3", "r2", "m7"),
            deliver("m7"),
            deliver("m8"),
            ScenarioEvent::CheckInvariantAll {},
        ],
    }
}

/// Two replicas bid, sync, release their tokens, sync again; only then
/// does a close succeed — and every replica converges on the high winner.
fn token_release_close() -> Scenario {
    Scenario {
        spec: "auction_safe".into(),
        bounds: bounds(&[("replicas", 2), ("bids", 2), ("amount_max", 2)]),
        policy: Policy::SkipAndRecord,
        events: vec![
            invoke("r1", "start_auction", &[]),
            send("r1", "r2", "s1"),
            deliver("s1"),
            invoke("r1", "place_bid", &[("b", json!("b1")), ("value", json!(1))]),
            invoke("r2", "place_bid", &[("b", json!("b2")), ("value", json!(2))]),
            send("r1", "r2", "s2"),
            deliver("s2"),
            send("r2", "r1", "s3"),
            deliver("s3"),
            invoke("r1", "release_token", &[]),
            invoke("r2", "release_token", &[]),
            send("r1", "r2", "s4"),
            deliver("s4"),
            send("r2", "r1", "s5"),
            deliver("s5"),
            invoke("r2", "close_auction", &[("w", json!("b2"))]),
            send("r2", "r1", "s6"),
            deliver("s6"),
            ScenarioEvent::CheckInvariantAll {},
            ScenarioEvent::CheckConverged {},
        ],
    }
}
