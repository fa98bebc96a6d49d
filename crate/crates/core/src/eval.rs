//! Scoring flags against annotations and summarizing runs.
//!
//! All scores are exact rationals. They are only turned into floats or
//! one-decimal percentages at the reporting boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::critique::actions_in_text;
use crate::engine::{TraceStatus, VerificationTrace};
use crate::judges::JudgeIdentity;
use crate::plan::{ActionId, Episode, ErrorAnnotation, MissingDescriptor};

pub const REPORT_SCHEMA: &str = "report/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("annotation for `{episode}` names action {id} which is not in the traced plan")]
    EpisodeMismatch { episode: String, id: ActionId },
    #[error("no traces to aggregate")]
    EmptyRun,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum MatchedPair {
    Remove { id: ActionId },
    Missing { flag: String, descriptor: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    #[serde(flatten)]
    pub total: Counts,
    pub remove: Counts,
    pub missing: Counts,
    pub pairs: Vec<MatchedPair>,
}

/// Verbs a free-text flag talks about: the verbs of any DSL actions quoted
/// in it, or failing that every word.
fn flag_verbs(flag: &str) -> Vec<String> {
    let quoted: Vec<String> = actions_in_text(flag).into_iter().map(|(_, s)| s.verb.to_lowercase()).collect();
    if !quoted.is_empty() {
        return quoted;
    }
    flag.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Whether a missing-step flag names the annotated step: same verb
/// (case-insensitive) and the object appears in the flag text.
pub fn missing_flag_matches(flag: &str, descriptor: &MissingDescriptor) -> bool {
    let verb = descriptor.verb.to_lowercase();
    flag.to_lowercase().contains(&descriptor.object.to_lowercase()) && flag_verbs(flag).contains(&verb)
}

/// Greedy one-to-one matching in flag order. Returns (flag, descriptor)
/// index pairs.
pub fn match_missing(flags: &[String], descriptors: &[MissingDescriptor]) -> Vec<(usize, usize)> {
    let mut taken = vec![false; descriptors.len()];
    let mut out = Vec::new();
    for (fi, flag) in flags.iter().enumerate() {
        if let Some(di) = (0..descriptors.len()).find(|&di| !taken[di] && missing_flag_matches(flag, &descriptors[di]))
        {
            taken[di] = true;
            out.push((fi, di));
        }
    }
    out
}

/// Scores explicit flag sets. Duplicate ids count once.
pub fn match_sets(flagged: &[ActionId], missing_flags: &[String], ann: &ErrorAnnotation) -> MatchResult {
    let flagged: BTreeSet<ActionId> = flagged.iter().copied().collect();
    let hits: Vec<ActionId> = flagged.intersection(&ann.remove_ids).copied().collect();
    let remove = Counts {
        tp: hits.len() as u64,
        fp: (flagged.len() - hits.len()) as u64,
        fn_: (ann.remove_ids.len() - hits.len()) as u64,
    };
    let pairs = match_missing(missing_flags, &ann.missing_steps);
    let missing = Counts {
        tp: pairs.len() as u64,
        fp: (missing_flags.len() - pairs.len()) as u64,
        fn_: (ann.missing_steps.len() - pairs.len()) as u64,
    };
    let mut audit: Vec<MatchedPair> = hits.into_iter().map(|id| MatchedPair::Remove { id }).collect();
    audit
        .extend(pairs.into_iter().map(|(f, d)| MatchedPair::Missing { flag: missing_flags[f].clone(), descriptor: d }));
    MatchResult { total: remove + missing, remove, missing, pairs: audit }
}

/// Flags are every action removed in any round plus every distinct
/// missing-step description.
pub fn match_flags(trace: &VerificationTrace, ann: &ErrorAnnotation) -> Result<MatchResult, EvalError> {
    if let Some(id) = ann.remove_ids.iter().find(|id| !trace.initial_plan.contains(**id)) {
        return Err(EvalError::EpisodeMismatch { episode: trace.episode_id.clone(), id: *id });
    }
    let removed: Vec<ActionId> =
        trace.iterations.iter().filter_map(|it| it.revision.as_ref()).flat_map(|r| r.removed.iter().copied()).collect();
    Ok(match_sets(&removed, &trace.missing_flags(), ann))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub recall: Ratio<u64>,
    pub precision: Ratio<u64>,
    pub f1: Ratio<u64>,
}

/// Empty denominators: no flags means precision 1, nothing to find means
/// recall 1, and f1 is 0 when both rates are 0.
pub fn compute_metrics(c: &Counts) -> Metrics {
    let recall = if c.tp + c.fn_ == 0 { Ratio::from_integer(1) } else { Ratio::new(c.tp, c.tp + c.fn_) };
    let precision = if c.tp + c.fp == 0 { Ratio::from_integer(1) } else { Ratio::new(c.tp, c.tp + c.fp) };
    Metrics { recall, precision, f1: f1_from_rates(precision, recall) }
}

pub fn f1_from_rates(precision: Ratio<u64>, recall: Ratio<u64>) -> Ratio<u64> {
    let sum = precision + recall;
    if sum == Ratio::from_integer(0) {
        Ratio::from_integer(0)
    } else {
        Ratio::from_integer(2) * precision * recall / sum
    }
}

/// One-decimal percentage, rounding halves up: 0.88989 -> "89.0".
pub fn percent(r: Ratio<u64>) -> String {
    let (n, d) = (*r.numer() as u128, *r.denom() as u128);
    let tenths = (2 * n * 1000 + d) / (2 * d);
    format!("{}.{}", tenths / 10, tenths % 10)
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// A rate as written to reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub exact: String,
    pub value: f64,
    pub percent: String,
}

impl From<Ratio<u64>> for Score {
    fn from(r: Ratio<u64>) -> Self {
        Score { exact: format!("{}/{}", r.numer(), r.denom()), value: ratio_f64(r), percent: percent(r) }
    }
}

fn ser_ratios<S: Serializer>(v: &[Ratio<u64>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| Score::from(*r)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStats {
    /// `per_round[r-1]`: traces whose first empty critique set came in round r.
    pub per_round: Vec<u64>,
    #[serde(serialize_with = "ser_ratios")]
    pub cumulative: Vec<Ratio<u64>>,
    pub total: u64,
    pub not_converged: u64,
    /// Mean error count before round 1 and after every round, over
    /// annotated traces. Converged traces keep their last value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error_by_round: Option<Vec<f64>>,
    /// `1 - exp(slope)` of a least-squares line through `ln(mean error)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
    pub mean_length_reduction: f64,
}

impl ConvergenceStats {
    pub fn cumulative_percent(&self) -> Vec<String> {
        self.cumulative.iter().map(|r| percent(*r)).collect()
    }
}

pub fn aggregate_convergence(traces: &[VerificationTrace]) -> Result<ConvergenceStats, EvalError> {
    if traces.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let rounds = traces.iter().map(|t| t.iterations.len()).max().unwrap_or(0).max(1);
    let mut per_round = vec![0u64; rounds];
    for t in traces {
        if let Some(k) = t.converged_at {
            per_round[k - 1] += 1;
        }
    }
    let total = traces.len() as u64;
    let mut running = 0;
    let cumulative = per_round
        .iter()
        .map(|c| {
            running += c;
            Ratio::new(running, total)
        })
        .collect();

    let curves: Vec<Vec<usize>> = traces.iter().filter(|t| !t.is_failed()).filter_map(|t| t.error_curve()).collect();
    let mean_error_by_round = (!curves.is_empty()).then(|| {
        (0..=rounds)
            .map(|r| curves.iter().map(|c| c[r.min(c.len() - 1)] as f64).sum::<f64>() / curves.len() as f64)
            .collect::<Vec<f64>>()
    });
    let decay_rate = mean_error_by_round.as_ref().and_then(|m| decay_fit(m));
    let mean_length_reduction =
        traces.iter().map(|t| t.initial_plan.len() as f64 - t.final_plan.len() as f64).sum::<f64>()
            / traces.len() as f64;

    Ok(ConvergenceStats {
        per_round,
        cumulative,
        total,
        not_converged: traces.iter().filter(|t| t.converged_at.is_none()).count() as u64,
        mean_error_by_round,
        decay_rate,
        mean_length_reduction,
    })
}

fn decay_fit(means: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        means.iter().enumerate().filter(|(_, m)| **m > 0.0).map(|(r, m)| (r as f64, m.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(1.0 - (sxy / sxx).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSection {
    pub counts: Counts,
    pub remove: Counts,
    pub missing: Counts,
    pub recall: Score,
    pub precision: Score,
    pub f1: Score,
    pub annotated_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub episode_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<MatchResult>,
    #[serde(skip)]
    pub metrics: Option<Metrics>,
    #[serde(flatten)]
    pub status: TraceStatus,
    pub converged_at: Option<usize>,
    pub len_before: usize,
    pub len_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: String,
    /// "single-pass" when no trace ran more than one round.
    pub mode: String,
    pub judges: Vec<JudgeIdentity>,
    pub planners: Vec<String>,
    pub episodes: usize,
    pub failed: usize,
    pub fail_open_events: usize,
    pub oscillating: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSection>,
    pub convergence: ConvergenceStats,
    pub per_episode: Vec<EpisodeRow>,
}

/// Pools counts over every annotated, non-failed trace (micro-average).
/// Episodes are looked up by id; traces without an annotated episode only
/// feed the convergence section.
pub fn summarize_run(traces: &[VerificationTrace], episodes: &[Episode]) -> Result<RunReport, EvalError> {
    let convergence = aggregate_convergence(traces)?;
    let by_id: BTreeMap<&str, &Episode> = episodes.iter().map(|e| (e.episode_id.as_str(), e)).collect();
    let mut rows = Vec::with_capacity(traces.len());
    let mut pooled: Vec<MatchResult> = Vec::new();
    for t in traces {
        let ann = by_id.get(t.episode_id.as_str()).and_then(|e| e.annotations.as_ref());
        let matches = match ann {
            Some(a) if !t.is_failed() => Some(match_flags(t, a)?),
            _ => None,
        };
        if let Some(m) = &matches {
            pooled.push(m.clone());
        }
        rows.push(EpisodeRow {
            episode_id: t.episode_id.clone(),
            metrics: matches.as_ref().map(|m| compute_metrics(&m.total)),
            matches,
            status: t.status.clone(),
            converged_at: t.converged_at,
            len_before: t.initial_plan.len(),
            len_after: t.final_plan.len(),
        });
    }
    let metrics = (!pooled.is_empty()).then(|| {
        let counts: Counts = pooled.iter().map(|m| m.total).sum();
        let m = compute_metrics(&counts);
        MetricsSection {
            counts,
            remove: pooled.iter().map(|m| m.remove).sum(),
            missing: pooled.iter().map(|m| m.missing).sum(),
            recall: m.recall.into(),
            precision: m.precision.into(),
            f1: m.f1.into(),
            annotated_episodes: pooled.len(),
        }
    });
    let mut judges: Vec<JudgeIdentity> = Vec::new();
    let mut planners: Vec<String> = Vec::new();
    for t in traces {
        if !judges.contains(&t.judge) {
            judges.push(t.judge.clone());
        }
        if !planners.contains(&t.planner) {
            planners.push(t.planner.clone());
        }
    }
    let single = traces.iter().all(|t| t.iterations.len() <= 1);
    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        mode: if single { "single-pass" } else { "iterative" }.to_string(),
        judges,
        planners,
        episodes: traces.len(),
        failed: traces.iter().filter(|t| t.is_failed()).count(),
        fail_open_events: traces.iter().map(|t| t.fail_open_count()).sum(),
        oscillating: traces.iter().filter(|t| t.status == TraceStatus::Oscillating).count(),
        metrics,
        convergence,
        per_episode: rows,
    })
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// `episode_id,tp,fp,fn,recall,precision,f1,converged_at,len_before,len_after`;
    /// score cells are empty for unannotated episodes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode_id,tp,fp,fn,recall,precision,f1,converged_at,len_before,len_after\n");
        for r in &self.per_episode {
            let scores = match (&r.matches, &r.metrics) {
                (Some(m), Some(x)) => format!(
                    "{},{},{},{},{},{}",
                    m.total.tp,
                    m.total.fp,
                    m.total.fn_,
                    percent(x.recall),
                    percent(x.precision),
                    percent(x.f1)
                ),
                _ => ",,,,,".to_string(),
            };
            let conv = r.converged_at.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{scores},{conv},{},{}", csv_field(&r.episode_id), r.len_before, r.len_after);
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
