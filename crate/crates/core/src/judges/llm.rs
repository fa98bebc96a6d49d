use std::sync::Arc;

use super::chat::{ChatClient, ChatMessage, ChatRequest, Role};
use super::prompt::{actions_text, judge_messages, PLANNER_TEMPLATE};
use super::{Judge, JudgeError, JudgeEvent, JudgeIdentity, JudgeOutcome};
use crate::critique::{normalize_critiques, parse_judge_output, CritiqueSet};
use crate::plan::Plan;
use crate::planner::{Inserter, InserterError};

/// Appended to the user message when a reply ignored the tag format.
pub const FORMAT_REMINDER: &str = "Reminder: answer strictly in the requested format. \
For every action write an `ACTION:` line followed by an `ANNOTATION:` line, \
put `#REMOVE: reason` inside the annotation of actions that should be removed, \
and finish with `#MISSING: description` lines for any missing steps.";

/// Where and how to call the model.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmEndpoint {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmEndpoint {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        LlmEndpoint {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: ChatRequest::DEFAULT_MAX_TOKENS,
        }
    }

    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

/// Judge backed by a chat-completion model.
pub struct LlmJudge {
    client: Arc<ChatClient>,
    endpoint: LlmEndpoint,
    reprompt: bool,
}

impl LlmJudge {
    pub fn new(client: Arc<ChatClient>, endpoint: LlmEndpoint) -> Self {
        LlmJudge { client, endpoint, reprompt: true }
    }

    pub fn with_reprompt(mut self, reprompt: bool) -> Self {
        self.reprompt = reprompt;
        self
    }
}

impl Judge for LlmJudge {
    fn identity(&self) -> JudgeIdentity {
        JudgeIdentity::new("llm", self.endpoint.model.clone())
    }

    fn evaluate(&self, goal: &str, plan: &Plan) -> Result<JudgeOutcome, JudgeError> {
        let mut messages = judge_messages(goal, plan)?;
        let reply = self.client.chat_complete(&self.endpoint.request(messages.clone()))?.content;
        let mut events = Vec::new();
        let parsed = match parse_judge_output(&reply, plan) {
            Ok(parsed) => parsed,
            Err(_) if self.reprompt => {
                events.push(JudgeEvent::Reprompted);
                let user = messages.last_mut().expect("judge prompt has a user message");
                user.content.push_str("\n\n");
                user.content.push_str(FORMAT_REMINDER);
                let second = self.client.chat_complete(&self.endpoint.request(messages))?.content;
                match parse_judge_output(&second, plan) {
                    Ok(parsed) => parsed,
                    Err(_) => return Ok(fail_open(second, events)),
                }
            }
            Err(_) => return Ok(fail_open(reply, events)),
        };
        Ok(JudgeOutcome { critiques: normalize_critiques(parsed.set), warnings: parsed.warnings, events })
    }
}

fn fail_open(reply: String, mut events: Vec<JudgeEvent>) -> JudgeOutcome {
    tracing::warn!("judge reply unusable after re-prompt; treating round as having no critiques");
    events.push(JudgeEvent::FailOpen { reply: reply.clone() });
    JudgeOutcome { critiques: CritiqueSet::new(Vec::new(), reply), warnings: Vec::new(), events }
}

/// Inserter that asks the planner model for the missing action lines.
pub struct LlmInserter {
    client: Arc<ChatClient>,
    endpoint: LlmEndpoint,
}

impl LlmInserter {
    pub fn new(client: Arc<ChatClient>, endpoint: LlmEndpoint) -> Self {
        LlmInserter { client, endpoint }
    }
}

impl Inserter for LlmInserter {
    fn label(&self) -> String {
        format!("llm:{}", self.endpoint.model)
    }

    fn propose(&self, plan: &Plan, missing: &str) -> Result<Vec<String>, InserterError> {
        let user = format!(
            "GOAL: {}\nActions:{}\nJudge feedback: #MISSING: {}\n\
             Reply with only the action lines to add, one per line, in the same format as the actions above.",
            plan.goal,
            actions_text(plan),
            missing
        );
        let messages =
            vec![ChatMessage::new(Role::System, PLANNER_TEMPLATE.preamble), ChatMessage::new(Role::User, user)];
        let reply = self
            .client
            .chat_complete(&self.endpoint.request(messages))
            .map_err(|e| InserterError::Backend(e.to_string()))?;
        Ok(reply
            .content
            .lines()
            .map(|l| {
                l.trim()
                    .trim_start_matches(|c: char| c.is_ascii_digit())
                    .trim_start_matches(['.', ')', '-', '*'])
                    .trim()
            })
            .map(|l| l.trim_matches('`').to_string())
            .filter(|l| !l.is_empty() && !l.starts_with("```"))
            .collect())
    }
}
