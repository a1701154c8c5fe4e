//! Text rendering for reports and the catalog. JSON output serializes the
//! same structures directly; everything here is presentation only.

use std::fmt::Write;

use replicheck_core::model::{ClauseVerdict, DomainBounds, ObjectSpec, ParamDomain, Predicate};
use replicheck_core::sim::{self, SimReport, TraceAction, TraceEntry};
use replicheck_core::specs::{self, BuiltinSpec};
use replicheck_core::check::PredicateCheck;
use replicheck_core::{CheckReport, Counterexample, Verdict};
use serde_json::json;

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::Skipped => "skipped",
    }
}

/// One line: `replicas=2, bids=2, amount=0..=2, cap=4000000`.
fn bounds_summary(bounds: &DomainBounds) -> String {
    let mut parts = vec![format!("replicas={}", bounds.replica_count)];
    for (name, size) in &bounds.id_domains {
        parts.push(format!("{name}={size}"));
    }
    for (name, (lo, hi)) in &bounds.int_ranges {
        parts.push(format!("{name}={lo}..={hi}"));
    }
    parts.push(format!("cap={}", bounds.enumeration_cap));
    parts.join(", ")
}

/// `pre_merge@r1(sigma, sigma_prime)` / `invariant(post_op)`.
fn predicate_call(check: &PredicateCheck) -> String {
    let at = check
        .me
        .as_ref()
        .map(|me| format!("@{me}"))
        .unwrap_or_default();
    format!("{}{at}({})", check.predicate, check.states.join(", "))
}

fn push_clause(out: &mut String, indent: &str, clause: &ClauseVerdict) {
    let _ = write!(out, "{indent}clause {}: {}", clause.name, clause.text);
    if let Some(note) = &clause.note {
        let _ = write!(out, "  [{note}]");
    }
    out.push('\n');
}

fn push_counterexample(out: &mut String, index: usize, cex: &Counterexample) {
    let _ = write!(out, "    counterexample {index}");
    if let Some(orientation) = cex.orientation {
        let _ = write!(out, " (orientation {orientation})");
    }
    out.push('\n');

    if let Some(op) = &cex.operation {
        let args = op
            .args
            .iter()
            .map(|(k, v)| format!("{k}={}", plain(v)))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "      operation: {}({args}) at {}", op.name, op.origin);
    }
    let width = cex
        .witnesses
        .iter()
        .map(|w| w.role.len())
        .max()
        .unwrap_or(0);
    for witness in &cex.witnesses {
        let _ = writeln!(
            out,
            "      {:width$} = {}",
            witness.role,
            serde_json::to_string(&witness.state).unwrap()
        );
    }
    if !cex.assumptions.is_empty() {
        let held = cex
            .assumptions
            .iter()
            .map(predicate_call)
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "      held: {held}");
    }
    if cex.failed.predicate == "structure" {
        // Structural findings carry their whole story in the clause text.
        for clause in &cex.failed.clauses {
            push_clause(out, "      ", clause);
        }
    } else {
        let _ = writeln!(out, "      failed: {}", predicate_call(&cex.failed));
        for clause in cex.failed.clauses.iter().filter(|c| !c.holds) {
            push_clause(out, "        ", clause);
        }
    }
}

pub fn check_report(report: &CheckReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "checking `{}` (replicheck {})",
        report.spec, report.version
    );
    let _ = writeln!(out, "bounds: {}", bounds_summary(&report.bounds));
    let _ = writeln!(out, "note: {}", report.scope);
    out.push('\n');

    for stage in &report.stages {
        let failing = stage.assertions.iter().filter(|a| !a.passed()).count();
        let tally = match stage.verdict {
            Verdict::Skipped => String::new(),
            Verdict::Pass => format!("  {} assertions", stage.assertions.len()),
            Verdict::Fail => format!(
                "  {failing} of {} assertions failing",
                stage.assertions.len()
            ),
        };
        let _ = writeln!(
            out,
            "  {:18} {:7}{tally}",
            stage.stage.to_string(),
            verdict_word(stage.verdict)
        );
        for warning in &stage.warnings {
            let _ = writeln!(out, "      warning: {warning}");
        }
    }

    let mut first = true;
    for stage in &report.stages {
        for assertion in stage.assertions.iter().filter(|a| !a.passed()) {
            if first {
                out.push('\n');
                first = false;
            }
            let op = assertion
                .operation
                .as_ref()
                .map(|o| format!(", operation {o}"))
                .unwrap_or_default();
            let _ = writeln!(out, "{} / {}{op}", stage.stage, assertion.assertion);
            let more = if assertion.truncated {
                " (more exist)"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "    {} checked, {} violations, {} recorded{more}",
                assertion.checked,
                assertion.violations,
                assertion.counterexamples.len()
            );
            if let Some(sample) = &assertion.sampled {
                let _ = writeln!(
                    out,
                    "    sampled: {} draws, seed {}",
                    sample.samples, sample.seed
                );
            }
            for (i, cex) in assertion.counterexamples.iter().enumerate() {
                push_counterexample(&mut out, i + 1, cex);
            }
        }
    }

    out.push('\n');
    let _ = writeln!(
        out,
        "states enumerated {} ({} valid), merge pairs {}, merge triples {}",
        report.stats.states_enumerated,
        report.stats.valid_states,
        report.stats.valid_pairs,
        report.stats.triples_checked
    );
    let _ = writeln!(out, "completed in {} ms", report.stats.duration_ms);
    let _ = writeln!(out, "verdict: {}", verdict_word(report.verdict));
    out
}

/// Unquoted rendering for argument values inside `op(k=v)` calls.
fn plain(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn push_trace_entry(out: &mut String, entry: &TraceEntry) {
    let line = match &entry.action {
        TraceAction::Invoke {
            replica,
            op,
            args,
            applied,
        } => {
            let args = args
                .iter()
                .map(|(k, v)| format!("{k}={}", plain(v)))
                .collect::<Vec<_>>()
                .join(", ");
            let fate = if *applied { "" } else { " — rejected" };
            format!("invoke   {op}({args}) at {replica}{fate}")
        }
        TraceAction::Send { id, from, to } => format!("send     {id}: {from} -> {to}"),
        TraceAction::Deliver { id, from, to } => format!("deliver  {id}: {from} -> {to}"),
        TraceAction::Drop { id } => format!("drop     {id}"),
        TraceAction::Duplicate { of, id } => format!("dup      {id} (copy of {of})"),
        TraceAction::Sync { from, to } => format!("sync     {from} -> {to}"),
        TraceAction::CheckInvariant { failing } => {
            if failing.is_empty() {
                "check    invariant holds everywhere".into()
            } else {
                format!("check    invariant FAILS at {} replica(s)", failing.len())
            }
        }
        TraceAction::CheckConverged {
            converged,
            distinct_states,
        } => {
            if *converged {
                "check    converged (1 distinct state)".into()
            } else {
                format!("check    DIVERGED ({distinct_states} distinct states)")
            }
        }
    };
    let _ = writeln!(out, "  {:>4}  {line}", entry.step);
    if let TraceAction::CheckInvariant { failing } = &entry.action {
        for finding in failing {
            let _ = writeln!(out, "        - {finding}");
        }
    }
    for note in &entry.notes {
        let _ = writeln!(out, "        - {note}");
    }
}

pub fn sim_report(report: &SimReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "simulating `{}` (replicheck {})",
        report.spec,
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(out, "bounds: {}", bounds_summary(&report.bounds));
    let policy = match report.policy {
        sim::Policy::Halt => "halt",
        sim::Policy::SkipAndRecord => "skip_and_record",
    };
    let _ = write!(out, "policy: {policy}");
    if let Some(seed) = report.seed {
        let _ = write!(out, ", seed: {seed}");
    }
    out.push('\n');
    out.push('\n');

    for entry in &report.trace {
        push_trace_entry(&mut out, entry);
    }

    out.push('\n');
    let _ = writeln!(out, "final states:");
    for (replica, state) in &report.final_states {
        let _ = writeln!(
            out,
            "  {replica} = {}",
            serde_json::to_string(state).unwrap()
        );
    }

    out.push('\n');
    let _ = writeln!(
        out,
        "steps: {}, invocations: {} ({} rejected)",
        report.steps, report.invocations, report.rejections
    );
    let _ = writeln!(
        out,
        "violations: {}, merge-precondition failures: {}",
        report.violations, report.pre_merge_failures
    );
    if let Some(converged) = report.converged {
        let _ = writeln!(out, "converged: {}", if converged { "yes" } else { "NO" });
    }
    if let Some(reason) = &report.halted {
        let _ = writeln!(out, "halted: {reason}");
    }
    let _ = writeln!(
        out,
        "result: {}",
        if report.clean { "clean" } else { "not clean" }
    );
    out
}

pub fn catalog() -> String {
    let mut out = String::new();
    let specs = specs::all_builtins();
    let scenarios = sim::all_scenarios();

    let _ = writeln!(out, "built-in objects:");
    let width = specs.iter().map(|b| b.name.len()).max().unwrap_or(0);
    for builtin in specs {
        let _ = writeln!(out, "  {:width$}  {}", builtin.name, builtin.summary);
    }
    out.push('\n');
    let _ = writeln!(out, "built-in scenarios:");
    let width = scenarios.iter().map(|s| s.name.len()).max().unwrap_or(0);
    for scenario in scenarios {
        let spec = (scenario.build)().spec;
        let _ = writeln!(
            out,
            "  {:width$}  [{spec}] {}",
            scenario.name, scenario.summary
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "run `replicheck list --spec NAME` for operations and default bounds."
    );
    out
}

fn clause_names(pred: &Predicate) -> String {
    if pred.clauses.is_empty() {
        "(always true)".into()
    } else {
        pred.clauses
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn param_domain(domain: &ParamDomain) -> String {
    match domain {
        ParamDomain::Id(name) => name.clone(),
        ParamDomain::Int { min, max } => format!("{min}..={max}"),
    }
}

pub fn spec_detail(builtin: &BuiltinSpec, spec: &ObjectSpec, bounds: &DomainBounds) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} — {}", builtin.name, builtin.summary);
    let _ = writeln!(out, "default bounds: {}", bounds_summary(bounds));
    if let Some(initial) = &spec.initial {
        let _ = writeln!(
            out,
            "initial: {}",
            serde_json::to_string(&initial.render(&spec.schema)).unwrap()
        );
    }
    out.push('\n');
    let _ = writeln!(out, "operations:");
    for op in &spec.operations {
        let params = op
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, param_domain(&p.domain)))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "  {}({params})", op.name);
        let _ = writeln!(out, "    requires {}", clause_names(&op.precondition));
    }
    out.push('\n');
    let _ = writeln!(out, "invariant: {}", clause_names(&spec.invariant));
    let _ = writeln!(out, "merge precondition: {}", clause_names(&spec.pre_merge));
    if let Some(leq) = &spec.leq {
        let _ = writeln!(out, "comparison: {}", clause_names(leq));
    }
    out
}

pub fn spec_detail_json(
    builtin: &BuiltinSpec,
    spec: &ObjectSpec,
    bounds: &DomainBounds,
) -> serde_json::Value {
    let names = |pred: &Predicate| {
        pred.clauses
            .iter()
            .map(|c| c.name.clone())
            .collect::<Vec<_>>()
    };
    let operations: Vec<_> = spec
        .operations
        .iter()
        .map(|op| {
            let params: Vec<_> = op
                .params
                .iter()
                .map(|p| json!({ "name": p.name, "domain": param_domain(&p.domain) }))
                .collect();
            json!({
                "name": op.name,
                "params": params,
                "precondition_clauses": names(&op.precondition),
            })
        })
        .collect();
    json!({
        "name": builtin.name,
        "summary": builtin.summary,
        "default_bounds": bounds,
        "initial": spec.initial.as_ref().map(|i| i.render(&spec.schema)),
        "operations": operations,
        "invariant_clauses": names(&spec.invariant),
        "pre_merge_clauses": names(&spec.pre_merge),
        "leq_clauses": spec.leq.as_ref().map(names),
    })
}
