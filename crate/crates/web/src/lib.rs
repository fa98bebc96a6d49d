//! Browser demo. Every export takes plain values and returns a JSON string;
//! the page in `www/` renders it. The same functions are plain Rust
//! underneath so they are tested natively.

use std::path::Path;

use planverify::corpus::{generate_corpus, inject_errors, oracle_script, ErrorProfile, GenSummary, InjectionKind};
use planverify::eval::{percent, Counts, RunReport};
use planverify::judges::{rule_hits, Judge, RuleHit, RuleJudge};
use planverify::{
    compute_metrics, format_action, match_flags, parse_plan, summarize_run, verify_episode, Episode, ErrorAnnotation,
    LoopConfig, Plan, TraceStatus, VerificationTrace,
};
use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

/// Keeps a sweep responsive in a browser tab.
pub const MAX_SWEEP: usize = 1000;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{0}")]
    Plan(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Run(String),
}

/// Accepts a `GOAL:` header followed by actions, or bare action lines.
pub fn read_plan(text: &str) -> Result<Plan, DemoError> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or_default();
    let parsed = if first.starts_with("GOAL:") {
        Plan::from_text(text)
    } else {
        parse_plan("", &text.lines().collect::<Vec<_>>())
    };
    parsed.map_err(|e| DemoError::Plan(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct RoundView {
    pub round: usize,
    pub removed: Vec<String>,
    pub missing: Vec<String>,
    pub plan_after: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct LoopView {
    pub judge: String,
    pub status: String,
    pub rounds: Vec<RoundView>,
    pub final_plan: Vec<String>,
    /// Remaining annotated errors before round 1 and after each round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_curve: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreView>,
}

#[derive(Debug, Serialize)]
pub struct ScoreView {
    pub counts: Counts,
    pub recall: String,
    pub precision: String,
    pub f1: String,
}

fn status_name(s: &TraceStatus) -> String {
    match s {
        TraceStatus::Converged => "converged".into(),
        TraceStatus::MaxRounds => "max_rounds".into(),
        TraceStatus::Oscillating => "oscillating".into(),
        TraceStatus::Failed { error } => format!("failed: {error}"),
    }
}

fn loop_view(trace: &VerificationTrace, ann: Option<&ErrorAnnotation>) -> Result<LoopView, DemoError> {
    let rounds = trace
        .iterations
        .iter()
        .map(|it| {
            let before = &it.plan_before;
            RoundView {
                round: it.round,
                removed: it
                    .revision
                    .iter()
                    .flat_map(|r| &r.removed)
                    .filter_map(|id| {
                        before.position_of(*id).and_then(|p| before.get(p)).map(|a| format_action(&a.step))
                    })
                    .collect(),
                missing: it.revision.iter().flat_map(|r| &r.unresolved).map(|o| o.description.clone()).collect(),
                plan_after: it.plan_after().canonical_lines(),
            }
        })
        .collect();
    let scores = match ann {
        Some(a) => {
            let m = match_flags(trace, a).map_err(|e| DemoError::Run(e.to_string()))?;
            let r = compute_metrics(&m.total);
            Some(ScoreView {
                counts: m.total,
                recall: percent(r.recall),
                precision: percent(r.precision),
                f1: percent(r.f1),
            })
        }
        None => None,
    };
    Ok(LoopView {
        judge: trace.judge.to_string(),
        status: status_name(&trace.status),
        rounds,
        final_plan: trace.final_plan.canonical_lines(),
        error_curve: ann.and(trace.error_curve()),
        scores,
    })
}

fn run_loop(ep: &Episode, judge: &dyn Judge) -> Result<VerificationTrace, DemoError> {
    verify_episode(ep, judge, None, &LoopConfig::default()).map_err(|e| DemoError::Run(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct LintView {
    pub goal: String,
    pub actions: Vec<String>,
    pub hits: Vec<RuleHit>,
    pub refinement: LoopView,
}

/// Rule findings for a pasted plan plus the loop run with the rule judge.
pub fn lint(text: &str) -> Result<LintView, DemoError> {
    let plan = read_plan(text)?;
    let ep =
        Episode { episode_id: "pasted".into(), context: String::new(), initial_plan: plan.clone(), annotations: None };
    let trace = run_loop(&ep, &RuleJudge)?;
    Ok(LintView {
        goal: plan.goal.clone(),
        actions: plan.canonical_lines(),
        hits: rule_hits(&plan),
        refinement: loop_view(&trace, None)?,
    })
}

#[derive(Debug, Serialize)]
pub struct NoisyLine {
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected: Option<InjectionKind>,
}

#[derive(Debug, Serialize)]
pub struct InjectView {
    pub clean: Vec<String>,
    pub noisy: Vec<NoisyLine>,
    pub deleted: Vec<String>,
    pub judges: Vec<LoopView>,
}

#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub dup: f64,
    pub inv: f64,
    pub irr: f64,
    pub del: f64,
}

fn profile(rates: Rates, seed: u64) -> ErrorProfile {
    ErrorProfile {
        dup_rate: rates.dup,
        inv_rate: rates.inv,
        irr_rate: rates.irr,
        del_rate: rates.del,
        seed,
        require_errors: true,
    }
}

/// Corrupts a clean plan, then runs the loop with the oracle and the rule
/// judge and shows how many annotated errors remain after each round.
pub fn inject_and_verify(text: &str, seed: u64, rates: Rates) -> Result<InjectView, DemoError> {
    let clean = read_plan(text)?;
    let inj = inject_errors(&clean, &profile(rates, seed)).map_err(|e| DemoError::Input(e.to_string()))?;
    let ep = Episode {
        episode_id: "demo".into(),
        context: String::new(),
        initial_plan: inj.noisy.clone(),
        annotations: Some(inj.truth.clone()),
    };
    let oracle = oracle_script(std::slice::from_ref(&ep)).judge("demo").map_err(|e| DemoError::Run(e.to_string()))?;
    let mut judges = Vec::new();
    for judge in [&oracle as &dyn Judge, &RuleJudge] {
        judges.push(loop_view(&run_loop(&ep, judge)?, Some(&inj.truth))?);
    }
    let noisy = inj
        .noisy
        .canonical_lines()
        .into_iter()
        .enumerate()
        .map(|(i, action)| NoisyLine {
            action,
            injected: inj.record.injected.iter().find(|s| s.index == i + 1).map(|s| s.kind),
        })
        .collect();
    Ok(InjectView {
        clean: clean.canonical_lines(),
        noisy,
        deleted: inj.record.deleted.iter().map(|d| d.action.clone()).collect(),
        judges,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepView {
    pub generated: GenSummary,
    pub report: RunReport,
}

/// Generates `n` synthetic episodes and scores one judge (`oracle` or `rules`) over them.
pub fn sweep(n: usize, seed: u64, judge: &str, rates: Rates) -> Result<SweepView, DemoError> {
    if !(1..=MAX_SWEEP).contains(&n) {
        return Err(DemoError::Input(format!("corpus size must be between 1 and {MAX_SWEEP}")));
    }
    let (files, generated) = generate_corpus(n, &profile(rates, seed)).map_err(|e| DemoError::Input(e.to_string()))?;
    let episodes = files
        .iter()
        .map(|f| f.to_episode(Path::new(&f.episode_id)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|errs| DemoError::Run(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
    let book = oracle_script(&episodes);
    let mut traces = Vec::with_capacity(episodes.len());
    for ep in &episodes {
        let trace = match judge {
            "oracle" => run_loop(ep, &book.judge(&ep.episode_id).map_err(|e| DemoError::Run(e.to_string()))?)?,
            "rules" => run_loop(ep, &RuleJudge)?,
            other => return Err(DemoError::Input(format!("unknown judge `{other}`; expected oracle or rules"))),
        };
        traces.push(trace);
    }
    let report = summarize_run(&traces, &episodes).map_err(|e| DemoError::Run(e.to_string()))?;
    Ok(SweepView { generated, report })
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsError> {
    match r {
        Ok(v) => Ok(serde_json::to_string(&v).expect("views serialize")),
        Err(e) => Err(JsError::new(&e.to_string())),
    }
}

#[wasm_bindgen(js_name = lintPlan)]
pub fn lint_plan_js(text: &str) -> Result<String, JsError> {
    to_js(lint(text))
}

#[wasm_bindgen(js_name = injectAndVerify)]
pub fn inject_and_verify_js(text: &str, seed: u32, dup: f64, inv: f64, irr: f64, del: f64) -> Result<String, JsError> {
    to_js(inject_and_verify(text, u64::from(seed), Rates { dup, inv, irr, del }))
}

#[wasm_bindgen(js_name = sweepCorpus)]
pub fn sweep_js(n: u32, seed: u32, judge: &str, dup: f64, inv: f64, irr: f64, del: f64) -> Result<String, JsError> {
    to_js(sweep(n as usize, u64::from(seed), judge, Rates { dup, inv, irr, del }))
}
