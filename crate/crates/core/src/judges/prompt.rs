use std::collections::BTreeMap;

use thiserror::Error;

use super::chat::{ChatMessage, Role};
use crate::plan::Plan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unresolved placeholder `{{{0}}}`")]
    Unresolved(String),
    #[error("cannot render a prompt for an empty plan")]
    EmptyPlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("reply contains no line starting with \"GOAL: \"")]
pub struct GoalExtractionError;

/// A role preamble (sent as the system message) plus a body with
/// `{name}` placeholders (sent as the user message).
#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub preamble: &'static str,
    pub body: &'static str,
}

pub const JUDGE_TEMPLATE: PromptTemplate = PromptTemplate {
    preamble: "You are a Judge Agent for embodied AI task planning. Your role is to provide
 thoughtful,natural language feedback on action sequences. You should:
1. Analyze each action's purpose and relevance to the goal
2. Explain your reasoning in clear, conversational language
3. Point out redundant or unnecessary actions with detailed explanations
4. Identify missing actions needed to complete the goal
5. Focus on being helpful and constructive in your feedback
Provide your feedback as natural language commentary, using #REMOVE and 
#MISSING tags only when necessary. Prioritize clear explanations.",
    body: "Please evaluate this action sequence for achieving the following goal:
GOAL: {goal}
Action Sequence: {actions_text}
Provide line-by-line analysis of each action. For each action, explain what
it does and whether it's necessary for the goal. Use this format:
ACTION: [copy the exact action]
ANNOTATION: [explain what this action does and whether it's needed for the goal. 
If the action should be removed, include \"#REMOVE: reason\".
If it's good, just explain why.]
After analyzing all actions, if any steps are missing to complete the goal, add:
#MISSING: [describe what actions are needed]
Be thorough and conversational in your explanations. Focus on helping someone 
understand why each action is or isn't necessary for achieving the goal.
Your line-by-line analysis:",
};

pub const PLANNER_TEMPLATE: PromptTemplate = PromptTemplate {
    preamble: "You are a Planning Agent for embodied AI tasks. Your role is to:
1. Analyze action sequences and identify their goals
2. Modify action sequences based on feedback from a Judge
3. Remove redundant actions and add missing actions as needed
4. Ensure action sequences are efficient and complete
Always preserve the original format and only make necessary changes.",
    body: "Analyze the following action sequence and determine the overall 
Context: {context}
Actions:{actions_text}
Provide a concise goal statement starting with \"GOAL: \"",
};

impl PromptTemplate {
    /// Substitutes every `{name}` in the body in one pass; values are not
    /// rescanned, so braces inside a goal are left alone.
    pub fn render_body(&self, values: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
        let body = self.body;
        let mut out = String::with_capacity(body.len());
        let mut rest = body;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) if after[..close].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && close > 0 => {
                    let name = &after[..close];
                    let value = values.get(name).ok_or_else(|| TemplateError::Unresolved(name.to_string()))?;
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }

    pub fn render(&self, values: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
        Ok(format!("{}\n{}", self.preamble, self.render_body(values)?))
    }

    pub fn messages(&self, values: &BTreeMap<&str, &str>) -> Result<Vec<ChatMessage>, TemplateError> {
        Ok(vec![ChatMessage::new(Role::System, self.preamble), ChatMessage::new(Role::User, self.render_body(values)?)])
    }
}

/// One action per line, each prefixed by its 1-based index. Starts with a
/// newline so the list begins on its own line after the label.
pub(crate) fn actions_text(plan: &Plan) -> String {
    plan.actions().iter().map(|a| format!("\n{}. {}", a.index, a.step)).collect()
}

fn judge_values<'a>(goal: &'a str, actions: &'a str) -> BTreeMap<&'static str, &'a str> {
    BTreeMap::from([("goal", goal), ("actions_text", actions)])
}

pub fn render_judge_prompt(goal: &str, plan: &Plan) -> Result<String, TemplateError> {
    if plan.is_empty() {
        return Err(TemplateError::EmptyPlan);
    }
    JUDGE_TEMPLATE.render(&judge_values(goal, &actions_text(plan)))
}

pub fn judge_messages(goal: &str, plan: &Plan) -> Result<Vec<ChatMessage>, TemplateError> {
    if plan.is_empty() {
        return Err(TemplateError::EmptyPlan);
    }
    JUDGE_TEMPLATE.messages(&judge_values(goal, &actions_text(plan)))
}

pub fn render_planner_goal_prompt(context: &str, plan: &Plan) -> Result<String, TemplateError> {
    let actions = actions_text(plan);
    PLANNER_TEMPLATE.render(&BTreeMap::from([("context", context), ("actions_text", actions.as_str())]))
}

pub fn planner_goal_messages(context: &str, plan: &Plan) -> Result<Vec<ChatMessage>, TemplateError> {
    let actions = actions_text(plan);
    PLANNER_TEMPLATE.messages(&BTreeMap::from([("context", context), ("actions_text", actions.as_str())]))
}

/// Goal text from the first reply line that starts with `GOAL: `.
pub fn extract_goal(reply: &str) -> Result<String, GoalExtractionError> {
    reply
        .lines()
        .find_map(|l| l.trim_start().strip_prefix("GOAL: "))
        .map(|g| g.trim().to_string())
        .ok_or(GoalExtractionError)
}
