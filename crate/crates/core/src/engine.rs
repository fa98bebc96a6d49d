//! The iterative judge/planner loop and its per-episode trace.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critique::{CritiqueSet, ParseWarning};
use crate::eval::match_missing;
use crate::judges::{Judge, JudgeError, JudgeEvent, JudgeIdentity, JudgeProvider};
use crate::plan::{Episode, ErrorAnnotation, Plan};
use crate::planner::{apply_critiques, Inserter, PlanUpdateError, Revision};

pub const TRACE_SCHEMA: &str = "trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_rounds: usize,
    /// Record omissions without synthesizing actions, even if an inserter
    /// is supplied.
    pub removal_only: bool,
    /// Read by judge constructors; the loop itself never re-prompts.
    pub reprompt_on_malformed: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig { max_rounds: 5, removal_only: true, reprompt_on_malformed: true }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.max_rounds < 1 {
            return Err(EngineError::Config("max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("judge failed in round {round}: {source}")]
    Judge { round: usize, source: JudgeError },
    #[error("plan update failed in round {round}: {source}")]
    Update { round: usize, source: PlanUpdateError },
    #[error("trace io on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("trace {path} is invalid: {reason}")]
    BadTrace { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceStatus {
    /// The judge returned no critiques.
    Converged,
    /// Critiques persisted through the last allowed round.
    MaxRounds,
    /// A round undid the previous round's edit.
    Oscillating,
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    pub round: usize,
    pub plan_before: Plan,
    pub critiques: CritiqueSet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ParseWarning>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<JudgeEvent>,
    /// Absent for the converging round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<Revision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_count_before: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_count_after: Option<usize>,
}

impl Iteration {
    pub fn plan_after(&self) -> &Plan {
        self.revision.as_ref().map(|r| &r.resulting_plan).unwrap_or(&self.plan_before)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTrace {
    pub schema: String,
    pub episode_id: String,
    pub judge: JudgeIdentity,
    pub planner: String,
    pub initial_plan: Plan,
    pub iterations: Vec<Iteration>,
    #[serde(flatten)]
    pub status: TraceStatus,
    pub converged_at: Option<usize>,
    pub final_plan: Plan,
}

impl VerificationTrace {
    pub fn judge_calls(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.status, TraceStatus::Failed { .. })
    }

    /// `E(0), E(1), ...`: the error count before the first round followed by
    /// the count after every round. `None` without annotations.
    pub fn error_curve(&self) -> Option<Vec<usize>> {
        let first = self.iterations.first()?.error_count_before?;
        let mut out = vec![first];
        out.extend(
            self.iterations
                .iter()
                .map(|it| it.error_count_after.or(it.error_count_before))
                .collect::<Option<Vec<_>>>()?,
        );
        Some(out)
    }

    /// Every distinct missing-step description flagged across rounds.
    pub fn missing_flags(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for it in &self.iterations {
            for (d, _) in it.critiques.missing() {
                if !out.iter().any(|s| s == d) {
                    out.push(d.to_string());
                }
            }
        }
        out
    }

    pub fn fail_open_count(&self) -> usize {
        self.iterations.iter().flat_map(|it| &it.events).filter(|e| matches!(e, JudgeEvent::FailOpen { .. })).count()
    }
}

/// Errors still present: annotated actions that survive in `plan`, plus
/// annotated missing steps that no missing flag has named yet.
pub fn error_count(plan: &Plan, ann: &ErrorAnnotation, missing_flags: &[String]) -> usize {
    let live = ann.remove_ids.iter().filter(|id| plan.contains(**id)).count();
    let matched = match_missing(missing_flags, &ann.missing_steps).len();
    live + ann.missing_steps.len() - matched
}

fn planner_label(inserter: Option<&dyn Inserter>, cfg: &LoopConfig) -> String {
    match inserter {
        Some(i) if !cfg.removal_only => i.label(),
        _ => "removal-only".to_string(),
    }
}

/// Runs the loop to completion, keeping whatever was recorded when a round
/// fails.
fn run_episode(
    ep: &Episode,
    judge: &dyn Judge,
    inserter: Option<&dyn Inserter>,
    cfg: &LoopConfig,
) -> (VerificationTrace, Option<EngineError>) {
    let inserter = if cfg.removal_only { None } else { inserter };
    let mut trace = VerificationTrace {
        schema: TRACE_SCHEMA.to_string(),
        episode_id: ep.episode_id.clone(),
        judge: judge.identity(),
        planner: planner_label(inserter, cfg),
        initial_plan: ep.initial_plan.clone(),
        iterations: Vec::new(),
        status: TraceStatus::MaxRounds,
        converged_at: None,
        final_plan: ep.initial_plan.clone(),
    };
    let ann = ep.annotations.as_ref();
    let mut flags: Vec<String> = Vec::new();
    let mut current = ep.initial_plan.clone();

    for round in 1..=cfg.max_rounds {
        let before = ann.map(|a| error_count(&current, a, &flags));
        let outcome = match judge.evaluate(ep.goal(), &current) {
            Ok(o) => o,
            Err(source) => {
                let err = EngineError::Judge { round, source };
                trace.status = TraceStatus::Failed { error: err.to_string() };
                trace.final_plan = current;
                return (trace, Some(err));
            }
        };
        let mut iteration = Iteration {
            round,
            plan_before: current.clone(),
            critiques: outcome.critiques,
            warnings: outcome.warnings,
            events: outcome.events,
            revision: None,
            error_count_before: before,
            error_count_after: None,
        };
        if iteration.critiques.is_empty() {
            iteration.error_count_after = before;
            trace.iterations.push(iteration);
            trace.status = TraceStatus::Converged;
            trace.converged_at = Some(round);
            break;
        }
        let revision = match apply_critiques(&current, &iteration.critiques, inserter) {
            Ok(r) => r,
            Err(source) => {
                let err = EngineError::Update { round, source };
                trace.iterations.push(iteration);
                trace.status = TraceStatus::Failed { error: err.to_string() };
                trace.final_plan = current;
                return (trace, Some(err));
            }
        };
        for (d, _) in iteration.critiques.missing() {
            if !flags.iter().any(|f| f == d) {
                flags.push(d.to_string());
            }
        }
        current = revision.resulting_plan.clone();
        iteration.error_count_after = ann.map(|a| error_count(&current, a, &flags));
        iteration.revision = Some(revision);

        let reverted = trace
            .iterations
            .last()
            .is_some_and(|prev| current.same_steps(&prev.plan_before) && !current.same_steps(&iteration.plan_before));
        trace.iterations.push(iteration);
        if reverted {
            tracing::warn!(episode = %ep.episode_id, round, "plan reverted to an earlier state; stopping");
            trace.status = TraceStatus::Oscillating;
            break;
        }
    }
    trace.final_plan = current;
    (trace, None)
}

/// Iterates judge and planner until the judge has no critiques or
/// `cfg.max_rounds` rounds have run.
pub fn verify_episode(
    ep: &Episode,
    judge: &dyn Judge,
    inserter: Option<&dyn Inserter>,
    cfg: &LoopConfig,
) -> Result<VerificationTrace, EngineError> {
    cfg.validate()?;
    match run_episode(ep, judge, inserter, cfg) {
        (trace, None) => Ok(trace),
        (_, Some(err)) => Err(err),
    }
}

/// Runs every episode with up to `parallelism` workers. Output order matches
/// input order; an episode that fails yields a trace with a failed status.
pub fn verify_corpus(
    episodes: &[Episode],
    judges: &dyn JudgeProvider,
    inserter: Option<&dyn Inserter>,
    cfg: &LoopConfig,
    parallelism: usize,
) -> Result<Vec<VerificationTrace>, EngineError> {
    cfg.validate()?;
    if parallelism < 1 {
        return Err(EngineError::Config("parallelism must be at least 1".into()));
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<VerificationTrace>>> = Mutex::new(vec![None; episodes.len()]);
    let run_one = |ep: &Episode| -> VerificationTrace {
        match judges.judge_for(ep) {
            Ok(judge) => run_episode(ep, judge.as_ref(), inserter, cfg).0,
            Err(e) => VerificationTrace {
                schema: TRACE_SCHEMA.to_string(),
                episode_id: ep.episode_id.clone(),
                judge: judges.identity(),
                planner: planner_label(inserter, cfg),
                initial_plan: ep.initial_plan.clone(),
                iterations: Vec::new(),
                status: TraceStatus::Failed { error: e.to_string() },
                converged_at: None,
                final_plan: ep.initial_plan.clone(),
            },
        }
    };
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(episodes.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(ep) = episodes.get(i) else { break };
                let trace = run_one(ep);
                if let TraceStatus::Failed { error } = &trace.status {
                    tracing::error!(episode = %ep.episode_id, %error, "episode failed");
                }
                slots.lock().expect("trace slots poisoned")[i] = Some(trace);
            });
        }
    });
    Ok(slots.into_inner().expect("trace slots poisoned").into_iter().map(|t| t.expect("every episode ran")).collect())
}

/// Writes `<dir>/<episode_id>.json`.
pub fn write_trace(dir: &Path, trace: &VerificationTrace) -> Result<PathBuf, EngineError> {
    let path = dir.join(format!("{}.json", trace.episode_id));
    let mut text = serde_json::to_string_pretty(trace).expect("traces serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| EngineError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Reads every `*.json` trace in `dir`, sorted by file name.
pub fn read_traces(dir: &Path) -> Result<Vec<VerificationTrace>, EngineError> {
    let io = |source| EngineError::Io { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|source| EngineError::Io { path: path.clone(), source })?;
        let trace: VerificationTrace = serde_json::from_str(&text)
            .map_err(|e| EngineError::BadTrace { path: path.clone(), reason: e.to_string() })?;
        if trace.schema != TRACE_SCHEMA {
            return Err(EngineError::BadTrace { path, reason: format!("unsupported schema `{}`", trace.schema) });
        }
        out.push(trace);
    }
    Ok(out)
}
