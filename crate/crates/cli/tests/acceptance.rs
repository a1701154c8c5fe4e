//! The acceptance gate: nine end-to-end criteria covering checker
//! verdicts, an independent brute-force oracle, the walkthrough
//! scenarios, randomized convergence, counterexample replay, and output
//! determinism. Each test prints one `criterion N: PASS/FAIL` line;
//! tolerances and time budgets are pinned as constants below.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use replicheck_core::check::replay_counterexample;
use replicheck_core::model::DomainBounds;
use replicheck_core::sim::{self, Policy, RandomConfig};
use replicheck_core::specs::find_builtin;
use replicheck_core::{
    run_pipeline, CheckConfig, CheckReport, CheckStage, ObjectSpec, StageSelection, Verdict,
};

const PAIR_COUNTER_BUDGET: i64 = 10;
const PAIR_COUNTER_TIME: Duration = Duration::from_secs(10);
const ORACLE_TIME: Duration = Duration::from_secs(60);
const UNSAFE_AUCTION_TIME: Duration = Duration::from_secs(300);
const SAFE_AUCTION_TIME: Duration = Duration::from_secs(600);
const SCENARIO_TIME: Duration = Duration::from_secs(1);
const RANDOM_RUNS: u64 = 100;
const RANDOM_STEPS: u64 = 200;
const RANDOM_DROP: f64 = 0.3;
const RANDOM_DUP: f64 = 0.2;

fn criterion(n: u32, title: &str, f: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    match &outcome {
        Ok(()) => println!("criterion {n} ({title}): PASS in {:?}", start.elapsed()),
        Err(_) => println!("criterion {n} ({title}): FAIL"),
    }
    if let Err(panic) = outcome {
        resume_unwind(panic);
    }
}

fn build(name: &str) -> (ObjectSpec, DomainBounds) {
    let builtin = find_builtin(name).unwrap();
    let bounds = builtin.default_bounds();
    (builtin.build(&bounds).unwrap(), bounds)
}

fn check(name: &str, config: &CheckConfig) -> CheckReport {
    let (spec, bounds) = build(name);
    run_pipeline(&spec, &bounds, config).unwrap()
}

fn stage_verdict(report: &CheckReport, stage: CheckStage) -> Verdict {
    report.stage(stage).unwrap().verdict
}

/// The shared-budget counter is safe sequentially but not concurrently:
/// every stage passes except concurrent safety, which must blame both
/// increment operations and exhibit a merged total one past the budget.
#[test]
fn criterion_1_pair_counter_verdicts() {
    criterion(1, "pair counter verdicts", || {
        let start = Instant::now();
        let report = check("pair_counter", &CheckConfig::default());
        for stage in [
            CheckStage::WellFormedness,
            CheckStage::Compliance,
            CheckStage::Convergence,
            CheckStage::SequentialSafety,
        ] {
            assert_eq!(stage_verdict(&report, stage), Verdict::Pass, "{stage}");
        }
        assert_eq!(
            stage_verdict(&report, CheckStage::ConcurrentSafety),
            Verdict::Fail
        );

        let concurrent = report.stage(CheckStage::ConcurrentSafety).unwrap();
        let failing: BTreeSet<&str> = concurrent
            .assertions
            .iter()
            .filter(|a| !a.passed())
            .filter_map(|a| a.operation.as_deref())
            .collect();
        assert_eq!(failing, BTreeSet::from(["incn", "incm"]));

        // A recorded counterexample's post-operation pair must overshoot
        // the budget by exactly one when joined with the peer state.
        let cex = concurrent
            .assertions
            .iter()
            .filter(|a| !a.passed())
            .flat_map(|a| a.counterexamples.iter())
            .next()
            .expect("a counterexample is recorded");
        let field = |role: &str, key: &str| -> i64 {
            cex.witnesses
                .iter()
                .find(|w| w.role == role)
                .unwrap()
                .state[key]
                .as_i64()
                .unwrap()
        };
        let joined = field("post_op", "n").max(field("sigma_prime", "n"))
            + field("post_op", "m").max(field("sigma_prime", "m"));
        assert_eq!(joined, PAIR_COUNTER_BUDGET + 1);
        assert!(start.elapsed() < PAIR_COUNTER_TIME);
    });
}

/// An oracle written with nothing but integer loops must agree exactly,
/// tuple for tuple, with the checker's operation-stability violations.
#[test]
fn criterion_2_brute_force_oracle_agrees() {
    criterion(2, "independent brute-force oracle", || {
        let start = Instant::now();

        // Oracle: for each increment, replica, and pair of in-budget
        // states allowed to merge, the operation breaks the merge
        // precondition iff the bumped join exceeds the budget. No model
        // machinery is used here.
        let b = PAIR_COUNTER_BUDGET;
        let mut expected: BTreeSet<(String, usize, i64, i64, i64, i64)> = BTreeSet::new();
        for op in ["incn", "incm"] {
            for me in 0..2usize {
                for n in 0..=12i64 {
                    for m in 0..=12i64 {
                        if n + m > b - 1 {
                            continue; // invariant + headroom precondition
                        }
                        for n2 in 0..=12i64 {
                            for m2 in 0..=12i64 {
                                if n2 + m2 > b || n.max(n2) + m.max(m2) > b {
                                    continue; // peer invariant + merge precondition
                                }
                                let (pn, pm) = match op {
                                    "incn" => (n + 1, m),
                                    _ => (n, m + 1),
                                };
                                if pn.max(n2) + pm.max(m2) > b {
                                    expected.insert((op.into(), me, n, m, n2, m2));
                                }
                            }
                        }
                    }
                }
            }
        }

        // Pipeline, first orientation only, recording every violation.
        let config = CheckConfig {
            stages: StageSelection::Only(CheckStage::ConcurrentSafety),
            check_both_pre_merge_orientations: false,
            max_counterexamples_per_assertion: 100_000,
            ..CheckConfig::default()
        };
        let report = check("pair_counter", &config);
        let concurrent = report.stage(CheckStage::ConcurrentSafety).unwrap();
        let mut actual: BTreeSet<(String, usize, i64, i64, i64, i64)> = BTreeSet::new();
        let mut reported_violations = 0;
        for assertion in &concurrent.assertions {
            if assertion.assertion != "op.preserves_pre_merge" {
                continue;
            }
            assert!(!assertion.truncated, "all violations must be recorded");
            reported_violations += assertion.violations;
            for cex in &assertion.counterexamples {
                let op = cex.operation.as_ref().unwrap();
                let me = op.origin.trim_start_matches('r').parse::<usize>().unwrap() - 1;
                let field = |role: &str, key: &str| -> i64 {
                    cex.witnesses
                        .iter()
                        .find(|w| w.role == role)
                        .unwrap()
                        .state[key]
                        .as_i64()
                        .unwrap()
                };
                actual.insert((
                    op.name.clone(),
                    me,
                    field("sigma", "n"),
                    field("sigma", "m"),
                    field("sigma_prime", "n"),
                    field("sigma_prime", "m"),
                ));
            }
        }
        assert_eq!(actual, expected);
        assert_eq!(reported_violations as usize, expected.len());
        assert!(start.elapsed() < ORACLE_TIME);
    });
}

/// The locally-guarded auction is sequentially safe; concurrency breaks
/// it through both the bid and the close, and only through operations.
#[test]
fn criterion_3_unguarded_auction_blames_both_writes() {
    criterion(3, "unguarded auction failure", || {
        let start = Instant::now();
        let report = check("auction_unsafe", &CheckConfig::default());
        assert_eq!(
            stage_verdict(&report, CheckStage::SequentialSafety),
            Verdict::Pass
        );
        assert_eq!(
            stage_verdict(&report, CheckStage::ConcurrentSafety),
            Verdict::Fail
        );
        let concurrent = report.stage(CheckStage::ConcurrentSafety).unwrap();
        let failing: BTreeSet<&str> = concurrent
            .assertions
            .iter()
            .filter(|a| !a.passed())
            .filter_map(|a| a.operation.as_deref())
            .collect();
        assert_eq!(failing, BTreeSet::from(["place_bid", "close_auction"]));
        let merge_stability = concurrent
            .assertions
            .iter()
            .find(|a| a.assertion == "merge.preserves_pre_merge")
            .unwrap();
        assert!(merge_stability.passed(), "merging alone stays stable");
        assert!(start.elapsed() < UNSAFE_AUCTION_TIME);
    });
}

/// The token handshake closes the hole: with the same bounds, every
/// stage passes.
#[test]
fn criterion_4_guarded_auction_passes() {
    criterion(4, "guarded auction passes", || {
        let start = Instant::now();
        let report = check("auction_safe", &CheckConfig::default());
        assert_eq!(report.verdict, Verdict::Pass);
        for stage in &report.stages {
            assert_eq!(stage.verdict, Verdict::Pass, "{}", stage.stage);
        }
        assert!(start.elapsed() < SAFE_AUCTION_TIME);
    });
}

/// The walkthrough scenario: a dropped higher bid arrives after closing
/// and leaves a closed auction crowning the lower bid. The guarded
/// variant refuses the close instead. Both runs are deterministic.
#[test]
fn criterion_5_walkthrough_scenario() {
    criterion(5, "walkthrough scenario", || {
        let start = Instant::now();
        let scenario = (sim::find_scenario("fig1_auction").unwrap().build)();

        let (spec, bounds) = scenario.resolve().unwrap();
        let broken = sim::run_scenario(&spec, &bounds, &scenario).unwrap();
        assert!(!broken.clean);
        assert!(broken.violations > 0);
        let closed = &broken.final_states["r3"];
        assert_eq!(closed["status"], "CLOSED");
        assert_eq!(closed["winner"], "b1");
        let bids = &closed["bids"];
        let winning = bids["b1"]["amount"].as_i64().unwrap();
        let losing = bids["b2"]["amount"].as_i64().unwrap();
        assert!(bids["b2"]["placed"].as_bool().unwrap());
        assert!(
            losing > winning,
            "a placed bid outbids the declared winner"
        );

        let mut guarded_scenario = scenario.clone();
        guarded_scenario.spec = "auction_safe".into();
        let (spec, bounds) = guarded_scenario.resolve().unwrap();
        let guarded = sim::run_scenario(&spec, &bounds, &guarded_scenario).unwrap();
        assert!(guarded.clean);
        assert_eq!(guarded.rejections, 1);
        let rejection = guarded
            .trace
            .iter()
            .flat_map(|e| e.notes.iter())
            .find(|n| n.contains("rejected"))
            .unwrap();
        assert!(rejection.contains("all_tokens_revoked"));

        let rerun = sim::run_scenario(&spec, &bounds, &guarded_scenario).unwrap();
        assert_eq!(
            serde_json::to_string(&guarded).unwrap(),
            serde_json::to_string(&rerun).unwrap()
        );
        assert!(start.elapsed() < SCENARIO_TIME);
    });
}

/// Reflexivity, transitivity, antisymmetry, inflation, and the two join
/// laws hold with zero violations for every built-in object.
#[test]
fn criterion_6_lattice_laws_hold_everywhere() {
    criterion(6, "lattice laws on every built-in", || {
        let config = CheckConfig {
            stages: StageSelection::Only(CheckStage::Convergence),
            ..CheckConfig::default()
        };
        for builtin in replicheck_core::specs::all_builtins() {
            let report = check(builtin.name, &config);
            let stage = report.stage(CheckStage::Convergence).unwrap();
            assert_eq!(stage.verdict, Verdict::Pass, "{}", builtin.name);
            for assertion in &stage.assertions {
                assert_eq!(
                    assertion.violations, 0,
                    "{}: {}",
                    builtin.name, assertion.assertion
                );
            }
        }
    });
}

/// One hundred seeded lossy random walks per safe object, each ending in
/// anti-entropy, must all converge (and stay violation-free).
#[test]
fn criterion_7_random_walks_converge() {
    criterion(7, "seeded random walks converge", || {
        for name in ["gset", "auction_safe"] {
            let (spec, bounds) = build(name);
            for seed in 0..RANDOM_RUNS {
                let cfg = RandomConfig {
                    seed,
                    steps: RANDOM_STEPS,
                    drop_probability: RANDOM_DROP,
                    duplicate_probability: RANDOM_DUP,
                };
                let report =
                    sim::run_random(&spec, &bounds, Policy::SkipAndRecord, &cfg).unwrap();
                assert_eq!(
                    report.converged,
                    Some(true),
                    "{name} diverged at seed {seed}"
                );
                assert!(report.clean, "{name} unclean at seed {seed}");
            }
        }
    });
}

/// Every counterexample recorded by criteria 1 and 3 re-executes from
/// its own witnesses to the same verdicts.
#[test]
fn criterion_8_counterexamples_replay() {
    criterion(8, "counterexamples replay", || {
        for name in ["pair_counter", "auction_unsafe"] {
            let (spec, bounds) = build(name);
            let report = run_pipeline(&spec, &bounds, &CheckConfig::default()).unwrap();
            let mut replayed = 0;
            for cex in report.counterexamples() {
                replay_counterexample(&spec, &bounds, cex)
                    .unwrap_or_else(|e| panic!("{name}/{}: {e}", cex.assertion));
                replayed += 1;
            }
            assert!(replayed > 0, "{name} recorded no counterexamples");
        }
    });
}

/// Two consecutive CLI runs emit byte-identical output once the elapsed
/// time is masked (the version string is identical by construction).
#[test]
fn criterion_9_cli_output_is_deterministic() {
    criterion(9, "deterministic CLI output", || {
        let run = |args: &[&str]| {
            let out = Command::new(env!("CARGO_BIN_EXE_replicheck"))
                .args(args)
                .output()
                .unwrap();
            String::from_utf8(out.stdout).unwrap()
        };
        let mask_json = |text: &str| {
            let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
            v["stats"]["duration_ms"] = 0.into();
            serde_json::to_string(&v).unwrap()
        };
        let mask_text = |text: &str| {
            text.lines()
                .filter(|l| !l.starts_with("completed in"))
                .collect::<Vec<_>>()
                .join("\n")
        };

        let json_args = ["check", "auction_unsafe", "--format", "json"];
        assert_eq!(mask_json(&run(&json_args)), mask_json(&run(&json_args)));

        let text_args = ["check", "pair_counter"];
        assert_eq!(mask_text(&run(&text_args)), mask_text(&run(&text_args)));

        let sim_args = ["simulate", "--builtin", "fig1_auction", "--format", "json"];
        assert_eq!(run(&sim_args), run(&sim_args));
    });
}
