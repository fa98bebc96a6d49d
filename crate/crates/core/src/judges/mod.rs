//! Judge backends: anything that maps `(goal, plan)` to a set of critiques.
//!
//! Three backends ship with the crate:
//!
//! * [`LlmJudge`] renders the judge prompt, calls a chat-completion endpoint
//!   through [`ChatClient`] (cached, with retries) and parses the reply.
//! * [`RuleJudge`] is a deterministic baseline built from four local rules.
//! * [`ScriptJudge`] replays a fixed list of critique rounds, for tests and
//!   for replaying recorded runs.

mod chat;
#[cfg(feature = "http")]
mod http;
mod llm;
mod prompt;
mod rules;
mod script;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critique::{CritiqueSet, ParseWarning};
use crate::plan::{Episode, Plan};

pub use chat::{
    CacheRecord, ChatClient, ChatError, ChatMessage, ChatRequest, ChatResponse, ResponseCache, RetryPolicy, Role,
    Sleeper, Transport, TransportFailure, TransportReply, Usage,
};
#[cfg(feature = "http")]
pub use http::HttpTransport;
pub use llm::{LlmEndpoint, LlmInserter, LlmJudge, FORMAT_REMINDER};
pub use prompt::{
    extract_goal, judge_messages, planner_goal_messages, render_judge_prompt, render_planner_goal_prompt,
    GoalExtractionError, PromptTemplate, TemplateError, JUDGE_TEMPLATE, PLANNER_TEMPLATE,
};
pub use rules::{rule_hits, rule_judge_evaluate, Rule, RuleHit, RuleJudge};
pub use script::{ScriptBook, ScriptJudge, ScriptRound, ScriptTarget, ScriptedCritique};

/// Name and version label of a backend, used in traces, reports and cache keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeIdentity {
    pub backend: String,
    pub label: String,
}

impl JudgeIdentity {
    pub fn new(backend: impl Into<String>, label: impl Into<String>) -> Self {
        JudgeIdentity { backend: backend.into(), label: label.into() }
    }
}

impl std::fmt::Display for JudgeIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.label.is_empty() {
            f.write_str(&self.backend)
        } else {
            write!(f, "{}:{}", self.backend, self.label)
        }
    }
}

/// Something that happened while producing critiques that is worth keeping
/// in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JudgeEvent {
    /// The first reply did not follow the format; the judge was asked again.
    Reprompted,
    /// Both replies were unusable; the round counts as "no critiques".
    FailOpen { reply: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JudgeOutcome {
    pub critiques: CritiqueSet,
    pub warnings: Vec<ParseWarning>,
    pub events: Vec<JudgeEvent>,
}

impl JudgeOutcome {
    pub fn new(critiques: CritiqueSet) -> Self {
        JudgeOutcome { critiques, ..Default::default() }
    }
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("script exhausted after {calls} call(s)")]
    ScriptIndex { calls: usize },
    #[error("scripted critique cannot be resolved against the plan: {0}")]
    ScriptTarget(String),
    #[error("no script for episode `{0}`")]
    NoScript(String),
}

/// The critique function J.
pub trait Judge: Send + Sync {
    fn identity(&self) -> JudgeIdentity;

    fn evaluate(&self, goal: &str, plan: &Plan) -> Result<JudgeOutcome, JudgeError>;
}

/// Hands out a judge per episode. Stateless backends share one instance;
/// scripted judges get a fresh replay cursor per episode.
pub trait JudgeProvider: Send + Sync {
    fn identity(&self) -> JudgeIdentity;

    fn judge_for(&self, episode: &Episode) -> Result<Arc<dyn Judge>, JudgeError>;
}

/// Provider that returns the same judge for every episode.
pub struct SharedJudge(pub Arc<dyn Judge>);

impl JudgeProvider for SharedJudge {
    fn identity(&self) -> JudgeIdentity {
        self.0.identity()
    }

    fn judge_for(&self, _episode: &Episode) -> Result<Arc<dyn Judge>, JudgeError> {
        Ok(Arc::clone(&self.0))
    }
}

impl<F> JudgeProvider for (JudgeIdentity, F)
where
    F: Fn(&Episode) -> Result<Arc<dyn Judge>, JudgeError> + Send + Sync,
{
    fn identity(&self) -> JudgeIdentity {
        self.0.clone()
    }

    fn judge_for(&self, episode: &Episode) -> Result<Arc<dyn Judge>, JudgeError> {
        (self.1)(episode)
    }
}
