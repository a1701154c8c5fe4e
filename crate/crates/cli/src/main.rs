//! Command-line front end: run the verification pipeline, drive
//! simulations from scenario files or seeded random walks, and browse the
//! built-in catalog.
//!
//! Exit codes: 0 when the check passes or the run is clean, 1 when a
//! violation was found, 2 for usage and input errors, 3 when the bounded
//! domain exceeds the enumeration cap.

mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use replicheck_core::model::ModelError;
use replicheck_core::sim::{self, Policy, RandomConfig, Scenario, SimError};
use replicheck_core::specs::{self, BuiltinSpec};
use replicheck_core::{
    run_pipeline, CheckConfig, CheckStage, LeastnessMode, MergePreservation, StageSelection,
    Verdict,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "replicheck",
    version,
    about = "bounded verification and simulation of replicated objects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a built-in object against the full pipeline (or one stage).
    Check(CheckArgs),
    /// Replay a scenario file, a built-in scenario, or a random walk.
    Simulate(SimulateArgs),
    /// List built-in objects and scenarios, or describe one object.
    List(ListArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Name of a built-in object (see `replicheck list`).
    spec: String,
    /// Bound overrides as comma-separated `key=value` pairs,
    /// e.g. `replicas=3,bids=2,amount_max=2`.
    #[arg(long, value_delimiter = ',', value_name = "KEY=VALUE")]
    bounds: Vec<String>,
    /// Run only the named stage (wellformedness, compliance, convergence,
    /// sequential_safety, concurrent_safety).
    #[arg(long)]
    stage: Option<CheckStage>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Counterexamples recorded per assertion (violations are still
    /// counted in full).
    #[arg(long = "max-cex", value_name = "N", default_value_t = 3)]
    max_cex: usize,
    /// Keep running later stages after a failure instead of skipping them.
    #[arg(long = "no-stop-on-failure")]
    no_stop_on_failure: bool,
    /// Least-upper-bound search: `exhaustive` or `sampled[:SAMPLES[:SEED]]`.
    /// Defaults to exhaustive within a work budget, sampled beyond it.
    #[arg(long, value_parser = parse_leastness, value_name = "MODE")]
    leastness: Option<LeastnessMode>,
    /// Check operations against the merge precondition in one direction
    /// only (skip the peer's view of the post-operation state).
    #[arg(long = "single-orientation")]
    single_orientation: bool,
    /// Check merge preservation against the second input instead of a
    /// third observer state.
    #[arg(long = "two-state-merge")]
    two_state_merge: bool,
    /// Worker threads for the enumeration stages (0 = library default).
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to a scenario JSON file.
    scenario: Option<PathBuf>,
    /// Run a built-in scenario by name instead of a file.
    #[arg(long, value_name = "NAME", conflicts_with = "scenario")]
    builtin: Option<String>,
    /// Object to simulate; overrides the scenario's own choice, required
    /// with --random.
    #[arg(long, value_name = "NAME")]
    spec: Option<String>,
    /// Bound overrides as comma-separated `key=value` pairs.
    #[arg(long, value_delimiter = ',', value_name = "KEY=VALUE")]
    bounds: Vec<String>,
    /// What to do when an invoke is rejected or a check fails.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Drive a seeded random walk instead of scripted events.
    #[arg(long)]
    random: bool,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "N", default_value_t = 200)]
    steps: u64,
    /// Probability a sent message is dropped (random walks).
    #[arg(long = "drop", value_name = "P", default_value_t = 0.3)]
    drop_probability: f64,
    /// Probability a sent message is duplicated (random walks).
    #[arg(long = "dup", value_name = "P", default_value_t = 0.2)]
    dup_probability: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct ListArgs {
    /// Describe one object: operations, clauses, default bounds.
    #[arg(long, value_name = "NAME")]
    spec: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Mirror of [`Policy`] with the scenario files' vocabulary.
#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    #[value(name = "halt")]
    Halt,
    #[value(name = "skip_and_record")]
    SkipAndRecord,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::Halt => Policy::Halt,
            PolicyArg::SkipAndRecord => Policy::SkipAndRecord,
        }
    }
}

fn parse_leastness(s: &str) -> Result<LeastnessMode, String> {
    let mut parts = s.split(':');
    match parts.next() {
        Some("exhaustive") if parts.next().is_none() => Ok(LeastnessMode::Exhaustive),
        Some("sampled") => {
            let number = |what, part: Option<&str>, default| match part {
                None => Ok(default),
                Some(text) => text
                    .parse::<u64>()
                    .map_err(|_| format!("{what} in `{s}` is not a number")),
            };
            let samples = number(
                "sample count",
                parts.next(),
                replicheck_core::check::DEFAULT_SAMPLES,
            )?;
            let seed = number("seed", parts.next(), replicheck_core::check::DEFAULT_SAMPLE_SEED)?;
            if parts.next().is_some() {
                return Err(format!("too many fields in `{s}`"));
            }
            Ok(LeastnessMode::Sampled { samples, seed })
        }
        _ => Err(format!(
            "unknown mode `{s}` (expected `exhaustive` or `sampled[:SAMPLES[:SEED]]`)"
        )),
    }
}

/// A terminating error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Failure {
        let code = if matches!(e, ModelError::DomainTooLarge { .. }) {
            3
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Failure {
        let code = match &e {
            SimError::Model(ModelError::DomainTooLarge { .. }) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::List(args) => cmd_list(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn lookup_builtin(name: &str) -> Result<&'static BuiltinSpec, Failure> {
    specs::find_builtin(name).ok_or_else(|| {
        Failure::usage(format!(
            "unknown object `{name}` (run `replicheck list` for the catalog)"
        ))
    })
}

fn parse_bound_pairs(pairs: &[String]) -> Result<Vec<(String, i64)>, Failure> {
    pairs
        .iter()
        .map(|pair| {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("bound `{pair}` is not `key=value`")))?;
            let value = value
                .parse::<i64>()
                .map_err(|_| Failure::usage(format!("bound `{pair}` has a non-integer value")))?;
            Ok((key.to_string(), value))
        })
        .collect()
}

fn cmd_check(args: CheckArgs) -> Result<u8, Failure> {
    let builtin = lookup_builtin(&args.spec)?;
    let mut bounds = builtin.default_bounds();
    for (key, value) in parse_bound_pairs(&args.bounds)? {
        specs::apply_bound(&mut bounds, &key, value)?;
    }
    let spec = builtin.build(&bounds)?;

    let mut config = CheckConfig::default();
    if let Some(stage) = args.stage {
        config.stages = StageSelection::Only(stage);
    }
    config.stop_on_first_failure = !args.no_stop_on_failure;
    config.max_counterexamples_per_assertion = args.max_cex;
    if let Some(mode) = args.leastness {
        config.leastness = mode;
    }
    config.check_both_pre_merge_orientations = !args.single_orientation;
    if args.two_state_merge {
        config.merge_preservation = MergePreservation::TwoState;
    }
    config.jobs = args.jobs;

    let report = run_pipeline(&spec, &bounds, &config)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        Format::Text => print!("{}", render::check_report(&report)),
    }
    Ok(u8::from(report.verdict == Verdict::Fail))
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let report = if args.random {
        let name = args.spec.as_deref().ok_or_else(|| {
            Failure::usage("--random needs --spec NAME to pick the object to walk")
        })?;
        let builtin = lookup_builtin(name)?;
        let mut bounds = builtin.default_bounds();
        for (key, value) in parse_bound_pairs(&args.bounds)? {
            specs::apply_bound(&mut bounds, &key, value)?;
        }
        let spec = builtin.build(&bounds)?;
        let cfg = RandomConfig {
            seed: args.seed,
            steps: args.steps,
            drop_probability: args.drop_probability,
            duplicate_probability: args.dup_probability,
        };
        let policy = args.policy.map(Policy::from).unwrap_or_default();
        sim::run_random(&spec, &bounds, policy, &cfg)?
    } else {
        let mut scenario = load_scenario(&args)?;
        if let Some(name) = &args.spec {
            scenario.spec = name.clone();
        }
        for (key, value) in parse_bound_pairs(&args.bounds)? {
            scenario.bounds.insert(key, value.into());
        }
        if let Some(policy) = args.policy {
            scenario.policy = policy.into();
        }
        let (spec, bounds) = scenario.resolve()?;
        sim::run_scenario(&spec, &bounds, &scenario)?
    };

    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        Format::Text => print!("{}", render::sim_report(&report)),
    }
    Ok(u8::from(!report.clean))
}

fn load_scenario(args: &SimulateArgs) -> Result<Scenario, Failure> {
    if let Some(path) = &args.scenario {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::usage(format!("cannot read scenario `{}`: {e}", path.display()))
        })?;
        return Scenario::from_json(&text).map_err(|e| {
            Failure::usage(format!("scenario `{}` is malformed: {e}", path.display()))
        });
    }
    if let Some(name) = &args.builtin {
        let scenario = sim::find_scenario(name).ok_or_else(|| {
            Failure::usage(format!(
                "unknown scenario `{name}` (run `replicheck list` for the catalog)"
            ))
        })?;
        return Ok((scenario.build)());
    }
    Err(Failure::usage(
        "nothing to simulate: give a scenario file, --builtin NAME, or --random --spec NAME",
    ))
}

fn cmd_list(args: ListArgs) -> Result<u8, Failure> {
    if let Some(name) = &args.spec {
        let builtin = lookup_builtin(name)?;
        let bounds = builtin.default_bounds();
        let spec = builtin.build(&bounds)?;
        match args.format {
            Format::Text => print!("{}", render::spec_detail(builtin, &spec, &bounds)),
            Format::Json => {
                let detail = render::spec_detail_json(builtin, &spec, &bounds);
                println!("{}", serde_json::to_string_pretty(&detail).unwrap());
            }
        }
        return Ok(0);
    }

    match args.format {
        Format::Text => print!("{}", render::catalog()),
        Format::Json => {
            let specs: Vec<_> = specs::all_builtins()
                .iter()
                .map(|b| json!({ "name": b.name, "summary": b.summary }))
                .collect();
            let scenarios: Vec<_> = sim::all_scenarios()
                .iter()
                .map(|s| {
                    json!({ "name": s.name, "summary": s.summary, "spec": (s.build)().spec })
                })
                .collect();
            let catalog = json!({ "specs": specs, "scenarios": scenarios });
            println!("{}", serde_json::to_string_pretty(&catalog).unwrap());
        }
    }
    Ok(0)
}
