//! Simulator runs: the canonical auction anomaly end-to-end, the guarded
//! protocol succeeding, scenario JSON parsing, seeded random walks, and
//! trace determinism.

use replicheck_core::sim::{
    find_scenario, run_random, run_scenario, Policy, RandomConfig, Scenario, SimError, TraceAction,
};
use replicheck_core::specs::find_builtin;

fn run_builtin_scenario(name: &str, spec_override: Option<&str>) -> replicheck_core::SimReport {
    let mut scenario = (find_scenario(name).unwrap().build)();
    if let Some(spec) = spec_override {
        scenario.spec = spec.into();
    }
    let (spec, bounds) = scenario.resolve().unwrap();
    run_scenario(&spec, &bounds, &scenario).unwrap()
}

#[test]
fn fig1_against_the_unguarded_auction_shows_the_violation() {
    let report = run_builtin_scenario("fig1_auction", None);
    assert_eq!(report.spec, "auction_unsafe");
    assert!(!report.clean);
    assert!(report.violations > 0);
    assert!(report.pre_merge_failures > 0);
    assert_eq!(report.rejections, 0);

    // The closing replica ends with a closed auction whose recorded winner
    // bid 1 while a placed bid of 2 sits next to it.
    let r3 = &report.final_states["r3"];
    assert_eq!(r3["status"], "CLOSED");
    assert_eq!(r3["winner"], "b1");
    assert_eq!(r3["bids"]["b1"]["placed"], true);
    assert_eq!(r3["bids"]["b1"]["amount"], 1);
    assert_eq!(r3["bids"]["b2"]["placed"], true);
    assert_eq!(r3["bids"]["b2"]["amount"], 2);

    // The final audit names the losing invariant clause.
    let audit = report
        .trace
        .iter()
        .find_map(|e| match &e.action {
            TraceAction::CheckInvariant { failing } => Some(failing),
            _ => None,
        })
        .unwrap();
    assert!(audit.iter().any(|f| f.contains("closed_winner_highest")));
}

#[test]
fn fig1_against_the_guarded_auction_rejects_the_close() {
    let report = run_builtin_scenario("fig1_auction", Some("auction_safe"));
    assert_eq!(report.spec, "auction_safe");
    assert!(report.clean, "trace: {:#?}", report.trace);
    assert_eq!(report.violations, 0);
    assert_eq!(report.pre_merge_failures, 0);
    assert_eq!(report.rejections, 1);

    let rejected = report
        .trace
        .iter()
        .find(|e| matches!(&e.action, TraceAction::Invoke { op, applied, .. } if op == "close_auction" && !applied))
        .expect("the close must be rejected");
    assert!(rejected.notes.iter().any(|n| n.contains("all_tokens_revoked")));
    assert_eq!(report.final_states["r3"]["status"], "ACTIVE");
}

#[test]
fn token_release_then_close_converges_cleanly() {
    let report = run_builtin_scenario("token_release_close", None);
    assert!(report.clean, "trace: {:#?}", report.trace);
    assert_eq!(report.violations, 0);
    assert_eq!(report.rejections, 0);
    assert_eq!(report.pre_merge_failures, 0);
    assert_eq!(report.converged, Some(true));
    for replica in ["r1", "r2"] {
        let s = &report.final_states[replica];
        assert_eq!(s["status"], "CLOSED");
        assert_eq!(s["winner"], "b2");
        assert_eq!(s["tokens"]["r1"], false);
        assert_eq!(s["tokens"]["r2"], false);
    }
}

#[test]
fn no_transition_in_the_builtin_scenarios_deflates() {
    for (name, spec) in [
        ("fig1_auction", None),
        ("fig1_auction", Some("auction_safe")),
        ("token_release_close", None),
    ] {
        let report = run_builtin_scenario(name, spec);
        assert!(
            !report
                .trace
                .iter()
                .any(|e| e.notes.iter().any(|n| n.contains("non-inflationary"))),
            "{name}"
        );
    }
}

#[test]
fn scenario_json_parses_and_runs() {
    let text = r#"{
        "spec": "gset",
        "bounds": {"replicas": 2, "elems": 2},
        "policy": "skip_and_record",
        "events": [
            {"invoke": {"replica": "r1", "op": "add", "params": {"e": "e1"}}},
            {"send": {"from": "r1", "to": "r2", "id": "m1"}},
            {"duplicate": {"of": "m1", "id": "m2"}},
            {"deliver": "m1"},
            {"drop": "m2"},
            {"invoke": {"replica": "r1", "op": "add", "params": {"e": "e1"}}},
            {"check_invariant_all": {}},
            {"check_converged": {}}
        ]
    }"#;
    let scenario = Scenario::from_json(text).unwrap();
    let (spec, bounds) = scenario.resolve().unwrap();
    let report = run_scenario(&spec, &bounds, &scenario).unwrap();
    // The duplicate add is rejected (already a member), the drop leaves the
    // duplicate undelivered, and both replicas end equal.
    assert_eq!(report.rejections, 1);
    assert_eq!(report.violations, 0);
    assert_eq!(report.converged, Some(true));
    assert_eq!(report.final_states["r1"]["members"]["e1"], true);
    assert_eq!(report.final_states["r2"]["members"]["e1"], true);
    assert_eq!(report.final_states["r1"]["members"]["e2"], false);
}

#[test]
fn delivering_an_unknown_message_is_a_scenario_error() {
    let text = r#"{"spec": "gset", "events": [{"deliver": "nope"}]}"#;
    let scenario = Scenario::from_json(text).unwrap();
    let (spec, bounds) = scenario.resolve().unwrap();
    let err = run_scenario(&spec, &bounds, &scenario).unwrap_err();
    assert!(matches!(err, SimError::UnknownMessage(id) if id == "nope"));
}

#[test]
fn halt_policy_stops_at_the_first_rejection() {
    let text = r#"{
        "spec": "gset",
        "policy": "halt",
        "events": [
            {"invoke": {"replica": "r1", "op": "add", "params": {"e": "e1"}}},
            {"invoke": {"replica": "r1", "op": "add", "params": {"e": "e1"}}},
            {"invoke": {"replica": "r1", "op": "add", "params": {"e": "e2"}}}
        ]
    }"#;
    let scenario = Scenario::from_json(text).unwrap();
    let (spec, bounds) = scenario.resolve().unwrap();
    let report = run_scenario(&spec, &bounds, &scenario).unwrap();
    assert!(report.halted.is_some());
    // The third invoke never ran.
    assert_eq!(report.invocations, 2);
    assert_eq!(report.final_states["r1"]["members"]["e2"], false);
}

#[test]
fn seeded_random_walks_converge_after_anti_entropy() {
    for spec_name in ["gset", "auction_safe"] {
        let builtin = find_builtin(spec_name).unwrap();
        let bounds = builtin.default_bounds();
        let spec = builtin.build(&bounds).unwrap();
        let cfg = RandomConfig {
            seed: 7,
            steps: 200,
            drop_probability: 0.3,
            duplicate_probability: 0.2,
        };
        let report = run_random(&spec, &bounds, Policy::SkipAndRecord, &cfg).unwrap();
        assert!(report.clean, "{spec_name}");
        assert_eq!(report.violations, 0, "{spec_name}");
        assert_eq!(report.converged, Some(true), "{spec_name}");
        assert_eq!(report.seed, Some(7));
        assert!(report.invocations > 0, "{spec_name}");
    }
}

#[test]
fn random_walk_surfaces_the_pair_counter_defect_yet_still_converges() {
    // The counter pair is concurrency-unsafe by design: independent
    // increments can merge past the shared budget. A random walk shows the
    // violation live — while the states still converge, which is the whole
    // problem: they agree on a bad value.
    let builtin = find_builtin("pair_counter").unwrap();
    let bounds = builtin.default_bounds();
    let spec = builtin.build(&bounds).unwrap();
    let cfg = RandomConfig {
        seed: 7,
        steps: 200,
        drop_probability: 0.3,
        duplicate_probability: 0.2,
    };
    let report = run_random(&spec, &bounds, Policy::SkipAndRecord, &cfg).unwrap();
    assert!(report.violations > 0);
    assert!(!report.clean);
    assert_eq!(report.converged, Some(true));
    let n = report.final_states["r1"]["n"].as_i64().unwrap();
    let m = report.final_states["r1"]["m"].as_i64().unwrap();
    assert!(n + m > 10, "converged on n={n}, m={m}");
}

#[test]
fn random_walks_are_deterministic_per_seed() {
    let builtin = find_builtin("auction_safe").unwrap();
    let bounds = builtin.default_bounds();
    let spec = builtin.build(&bounds).unwrap();
    let cfg = RandomConfig {
        seed: 11,
        steps: 150,
        drop_probability: 0.25,
        duplicate_probability: 0.25,
    };
    let a = run_random(&spec, &bounds, Policy::SkipAndRecord, &cfg).unwrap();
    let b = run_random(&spec, &bounds, Policy::SkipAndRecord, &cfg).unwrap();
    assert_eq!(
        serde_json::to_value(&a).unwrap(),
        serde_json::to_value(&b).unwrap()
    );
}
