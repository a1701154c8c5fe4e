//! End-to-end tests of the binary: exit codes, output formats, scenario
//! loading, and determinism.

use std::process::{Command, Output};

fn replicheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_replicheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn check_exit_codes_track_the_verdict() {
    let pass = replicheck(&["check", "gset"]);
    assert_eq!(pass.status.code(), Some(0), "{}", stderr(&pass));
    assert!(stdout(&pass).contains("verdict: pass"));

    let fail = replicheck(&["check", "pair_counter"]);
    assert_eq!(fail.status.code(), Some(1));
    let text = stdout(&fail);
    assert!(text.contains("verdict: FAIL"));
    assert!(text.contains("concurrent_safety / op.preserves_pre_merge"));

    let unknown = replicheck(&["check", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("unknown object"));

    let too_big = replicheck(&["check", "gset", "--bounds", "elems=23"]);
    assert_eq!(too_big.status.code(), Some(3));
    assert!(stderr(&too_big).contains("domain too large"));
}

#[test]
fn check_json_is_valid_and_structured() {
    let out = replicheck(&["check", "pair_counter", "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["spec"], "pair_counter");
    assert_eq!(report["verdict"], "fail");
    let stages: Vec<&str> = report["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        [
            "wellformedness",
            "compliance",
            "convergence",
            "sequential_safety",
            "concurrent_safety"
        ]
    );
}

#[test]
fn check_reports_are_deterministic_modulo_duration() {
    let normalize = |out: &Output| {
        let mut v: serde_json::Value = serde_json::from_str(&stdout(out)).unwrap();
        v["stats"]["duration_ms"] = 0.into();
        v
    };
    let first = replicheck(&["check", "auction_unsafe", "--format", "json"]);
    let second = replicheck(&["check", "auction_unsafe", "--format", "json"]);
    assert_eq!(normalize(&first), normalize(&second));
}

#[test]
fn stage_selection_runs_one_stage() {
    let out = replicheck(&["check", "pair_counter", "--stage", "convergence"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("convergence"));
    assert!(!text.contains("concurrent_safety"));
}

#[test]
fn max_cex_caps_recorded_counterexamples() {
    let out = replicheck(&[
        "check",
        "pair_counter",
        "--max-cex",
        "1",
        "--format",
        "json",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let concurrent = &report["stages"][4];
    for assertion in concurrent["assertions"].as_array().unwrap() {
        assert!(assertion["counterexamples"].as_array().unwrap().len() <= 1);
    }
}

#[test]
fn simulate_builtin_scenario_and_spec_override() {
    let unsafe_run = replicheck(&["simulate", "--builtin", "fig1_auction"]);
    assert_eq!(unsafe_run.status.code(), Some(1));
    let text = stdout(&unsafe_run);
    assert!(text.contains("invariant violated: closed_winner_highest"));
    assert!(text.contains("result: not clean"));

    let safe_run = replicheck(&["simulate", "--builtin", "fig1_auction", "--spec", "auction_safe"]);
    assert_eq!(safe_run.status.code(), Some(0), "{}", stderr(&safe_run));
    let text = stdout(&safe_run);
    assert!(text.contains("rejected"));
    assert!(text.contains("all_tokens_revoked"));
    assert!(text.contains("result: clean"));
}

#[test]
fn simulate_reads_scenario_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("walkthrough.json");
    std::fs::write(
        &path,
        r#"{
            "spec": "gset",
            "bounds": {"elems": 3},
            "events": [
                {"invoke": {"replica": "r1", "op": "add", "params": {"e": "e1"}}},
                {"send": {"from": "r1", "to": "r2", "id": "m1"}},
                {"deliver": "m1"},
                {"check_converged": {}}
            ]
        }"#,
    )
    .unwrap();
    let out = replicheck(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("converged: yes"));

    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = replicheck(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("malformed"));

    let missing = dir.path().join("absent.json");
    let out = replicheck(&["simulate", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn random_walks_are_reproducible() {
    let args = [
        "simulate", "--random", "--spec", "auction_safe", "--seed", "11", "--steps", "80",
        "--format", "json",
    ];
    let first = replicheck(&args);
    let second = replicheck(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);

    let other_seed = replicheck(&[
        "simulate", "--random", "--spec", "auction_safe", "--seed", "12", "--steps", "80",
        "--format", "json",
    ]);
    assert_ne!(first.stdout, other_seed.stdout);
}

#[test]
fn random_requires_a_spec() {
    let out = replicheck(&["simulate", "--random"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--spec"));
}

#[test]
fn list_shows_the_catalog_and_details() {
    let out = replicheck(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for name in ["pair_counter", "gset", "auction_safe", "auction_unsafe"] {
        assert!(text.contains(name), "catalog missing {name}");
    }
    assert!(text.contains("fig1_auction"));
    assert!(text.contains("token_release_close"));

    let detail = replicheck(&["list", "--spec", "auction_safe"]);
    let text = stdout(&detail);
    assert!(text.contains("place_bid"));
    assert!(text.contains("all_tokens_revoked"));

    let json = replicheck(&["list", "--spec", "gset", "--format", "json"]);
    let detail: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(detail["name"], "gset");
    assert_eq!(detail["operations"][0]["name"], "add");

    let unknown = replicheck(&["list", "--spec", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
}
