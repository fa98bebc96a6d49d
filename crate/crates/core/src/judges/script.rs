//! Replay judge. Each call returns the next scripted round; once the script
//! runs out every further call returns an empty set (or an error in strict
//! mode).
//!
//! Script files (`script/1`) are JSON:
//!
//! ```json
//! {
//!   "schema": "script/1",
//!   "default": [ { "critiques": [ { "remove": { "index": 1, "reason": "..." } } ] }, { "critiques": [] } ],
//!   "episodes": { "ep-001": [ { "reply": "ACTION: ...\nANNOTATION: #REMOVE: ..." } ] },
//!   "cycle": false
//! }
//! ```
//!
//! A removal target is one of `index` (position in the plan being judged),
//! `id` (stable action id) or `action` (canonical action text, must be
//! unique in the plan).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Judge, JudgeError, JudgeIdentity, JudgeOutcome, JudgeProvider};
use crate::critique::{normalize_critiques, parse_judge_output, Critique, CritiqueSet};
use crate::plan::{parse_action, ActionId, Episode, Plan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptTarget {
    Index(usize),
    Id(ActionId),
    Action(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedCritique {
    Remove {
        #[serde(flatten)]
        target: ScriptTarget,
        #[serde(default = "default_reason")]
        reason: String,
    },
    Missing {
        description: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        insert_after: Option<usize>,
    },
}

fn default_reason() -> String {
    "scripted removal".to_string()
}

/// One scripted judge call: either structured critiques or a raw reply that
/// goes through the regular reply parser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptRound {
    Critiques { critiques: Vec<ScriptedCritique> },
    Reply { reply: String },
}

impl ScriptRound {
    pub fn empty() -> Self {
        ScriptRound::Critiques { critiques: Vec::new() }
    }

    fn resolve(&self, plan: &Plan) -> Result<JudgeOutcome, JudgeError> {
        match self {
            ScriptRound::Reply { reply } => match parse_judge_output(reply, plan) {
                Ok(parsed) => Ok(JudgeOutcome {
                    critiques: normalize_critiques(parsed.set),
                    warnings: parsed.warnings,
                    events: Vec::new(),
                }),
                Err(_) => Err(JudgeError::ScriptTarget("scripted reply is malformed".into())),
            },
            ScriptRound::Critiques { critiques } => {
                let mut out = Vec::with_capacity(critiques.len());
                for c in critiques {
                    out.push(match c {
                        ScriptedCritique::Remove { target, reason } => {
                            let action = match target {
                                ScriptTarget::Index(i) => plan.get(*i),
                                ScriptTarget::Id(id) => plan.position_of(*id).and_then(|p| plan.get(p)),
                                ScriptTarget::Action(text) => {
                                    let step =
                                        parse_action(text).map_err(|e| JudgeError::ScriptTarget(e.to_string()))?;
                                    let mut hits = plan.actions().iter().filter(|a| a.step == step);
                                    match (hits.next(), hits.next()) {
                                        (Some(a), None) => Some(a),
                                        _ => None,
                                    }
                                }
                            }
                            .ok_or_else(|| JudgeError::ScriptTarget(format!("{target:?}")))?;
                            Critique::Remove { index: action.index, id: action.id, reason: reason.clone() }
                        }
                        ScriptedCritique::Missing { description, insert_after } => Critique::Missing {
                            description: description.clone(),
                            insert_after: Some(insert_after.unwrap_or(plan.len()).min(plan.len())),
                        },
                    });
                }
                Ok(JudgeOutcome::new(normalize_critiques(CritiqueSet::new(out, ""))))
            }
        }
    }
}

/// Replays scripted rounds in order. One instance per episode.
#[derive(Debug)]
pub struct ScriptJudge {
    rounds: Vec<ScriptRound>,
    cursor: AtomicUsize,
    strict: bool,
    cycle: bool,
    label: String,
}

impl ScriptJudge {
    pub fn new(rounds: Vec<ScriptRound>) -> Self {
        ScriptJudge { rounds, cursor: AtomicUsize::new(0), strict: false, cycle: false, label: String::new() }
    }

    /// Calls past the end of the script fail instead of returning empty sets.
    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    /// Restart from the first round after the last one.
    pub fn cycling(mut self) -> Self {
        self.cycle = true;
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn calls(&self) -> usize {
        self.cursor.load(Ordering::SeqCst)
    }
}

impl Judge for ScriptJudge {
    fn identity(&self) -> JudgeIdentity {
        JudgeIdentity::new("script", self.label.clone())
    }

    fn evaluate(&self, _goal: &str, plan: &Plan) -> Result<JudgeOutcome, JudgeError> {
        let call = self.cursor.fetch_add(1, Ordering::SeqCst);
        let slot = if self.cycle && !self.rounds.is_empty() { call % self.rounds.len() } else { call };
        match self.rounds.get(slot) {
            Some(round) => round.resolve(plan),
            None if self.strict => Err(JudgeError::ScriptIndex { calls: call + 1 }),
            None => Ok(JudgeOutcome::default()),
        }
    }
}

/// A script file: rounds per episode plus an optional default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptBook {
    #[serde(default = "script_schema")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<ScriptRound>>,
    #[serde(default)]
    pub episodes: BTreeMap<String, Vec<ScriptRound>>,
    #[serde(default)]
    pub cycle: bool,
    #[serde(default)]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

fn script_schema() -> String {
    "script/1".to_string()
}

impl ScriptBook {
    pub fn load(path: &Path) -> Result<ScriptBook, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        let mut book: ScriptBook =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        if book.label.is_empty() {
            book.label = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(book)
    }

    pub fn judge(&self, episode_id: &str) -> Result<ScriptJudge, JudgeError> {
        let rounds = self
            .episodes
            .get(episode_id)
            .or(self.default.as_ref())
            .ok_or_else(|| JudgeError::NoScript(episode_id.to_string()))?;
        let mut judge = ScriptJudge::new(rounds.clone()).labelled(self.label.clone());
        judge.strict = self.strict;
        judge.cycle = self.cycle;
        Ok(judge)
    }
}

impl JudgeProvider for ScriptBook {
    fn identity(&self) -> JudgeIdentity {
        JudgeIdentity::new("script", self.label.clone())
    }

    fn judge_for(&self, episode: &Episode) -> Result<Arc<dyn Judge>, JudgeError> {
        Ok(Arc::new(self.judge(&episode.episode_id)?))
    }
}
