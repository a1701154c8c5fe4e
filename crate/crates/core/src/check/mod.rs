//! The bounded checker: five stages over an exhaustively enumerated state
//! space, in a fixed order, each producing per-assertion verdicts with
//! replayable counterexamples. A failing stage normally short-circuits
//! the rest — later stages assume the earlier ones (safety proofs lean on
//! the lattice laws, which lean on structural validity).

mod compliance;
mod concurrent;
mod config;
mod context;
mod convergence;
mod replay;
mod report;
mod sequential;
mod wellformed;

pub use config::{
    CheckConfig, LeastnessMode, MergePreservation, StageSelection, DEFAULT_SAMPLES,
    DEFAULT_SAMPLE_SEED,
};
pub use context::{Analysis, BitMatrix};
pub use replay::{replay_counterexample, ReplayError};
pub use report::{
    AssertionBuilder, AssertionReport, CheckReport, CheckStage, CheckStats, Counterexample, OpRef,
    PredicateCheck, SampleInfo, StageReport, Verdict, Witness, ALL_STAGES, SCOPE_NOTE,
};

use std::time::Instant;

use crate::model::{DomainBounds, ModelError, ObjectSpec};

/// Runs the selected stages and assembles the report. Structural and
/// model-level failures *inside* a stage become stage verdicts; errors
/// that make continuing meaningless (an over-cap domain, or evaluation on
/// a spec an earlier stage already rejected — unless that earlier stage
/// was skipped from the selection) surface as `Err`.
pub fn run_pipeline(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
) -> Result<CheckReport, ModelError> {
    if config.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| ModelError::BadBounds(format!("worker pool: {e}")))?;
        return pool.install(|| pipeline_inner(spec, bounds, config));
    }
    pipeline_inner(spec, bounds, config)
}

fn pipeline_inner(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    config: &CheckConfig,
) -> Result<CheckReport, ModelError> {
    let start = Instant::now();
    let mut stages_out: Vec<StageReport> = Vec::new();
    let mut failed = false;
    let mut analysis: Option<Analysis> = None;
    let mut triples: u64 = 0;

    for stage in ALL_STAGES {
        if !config.stages.includes(stage) {
            continue;
        }
        if failed && config.stop_on_first_failure {
            stages_out.push(StageReport::skipped(stage));
            continue;
        }
        let outcome: Result<StageReport, ModelError> = match stage {
            CheckStage::WellFormedness => wellformed::run(spec, bounds, config),
            CheckStage::Compliance => Ok(compliance::run(spec, config)),
            heavy => {
                let built = if analysis.is_none() {
                    Analysis::build(spec, bounds, config).map(|a| {
                        analysis = Some(a);
                    })
                } else {
                    Ok(())
                };
                match built {
                    Err(e) => Err(e),
                    Ok(()) => {
                        let ana = analysis.as_ref().unwrap();
                        match heavy {
                            CheckStage::Convergence => convergence::run(spec, bounds, config, ana),
                            CheckStage::SequentialSafety => {
                                sequential::run(spec, bounds, config, ana)
                            }
                            CheckStage::ConcurrentSafety => concurrent::run(spec, bounds, config, ana)
                                .map(|(rep, t)| {
                                    triples = t;
                                    rep
                                }),
                            _ => unreachable!("heavy stages only"),
                        }
                    }
                }
            }
        };
        match outcome {
            Ok(rep) => {
                if rep.verdict == Verdict::Fail {
                    failed = true;
                }
                stages_out.push(rep);
            }
            Err(e @ ModelError::DomainTooLarge { .. }) => return Err(e),
            Err(e) if failed => {
                // A stage the pipeline only reached because stop-on-failure
                // is off; its prerequisites don't hold, so record why it
                // could not run instead of erroring the whole check.
                let mut rep = StageReport::skipped(stage);
                rep.warnings.push(format!("stage not run: {e}"));
                stages_out.push(rep);
            }
            Err(e) => return Err(e),
        }
    }

    let mut stats = CheckStats::default();
    if let Some(ana) = &analysis {
        stats.states_enumerated = ana.space.states.len() as u64;
        stats.valid_states = ana.valid.len() as u64;
        stats.valid_pairs = ana.valid_pair_count();
    }
    stats.triples_checked = triples;
    stats.duration_ms = start.elapsed().as_millis() as u64;

    let verdict = if failed { Verdict::Fail } else { Verdict::Pass };
    Ok(CheckReport {
        version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.name.clone(),
        bounds: bounds.clone(),
        config: config.clone(),
        scope: SCOPE_NOTE.into(),
        stages: stages_out,
        stats,
        verdict,
    })
}
