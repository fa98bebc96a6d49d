//! Deterministic rule baseline. Four removal-only rules, applied in order:
//!
//! * R1: an action identical to the one right before it (flags the repeat).
//! * R2: `ToggleOn(x)` immediately followed by `ToggleOff(x)` or the reverse
//!   (flags both).
//! * R3: `ToggleOff(x)` with no earlier `ToggleOn(x)`.
//! * R4: `PickUp(x)` where `x` is never an argument of a later action.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Judge, JudgeError, JudgeIdentity, JudgeOutcome};
use crate::critique::{normalize_critiques, Critique, CritiqueSet};
use crate::plan::Plan;

const TOGGLE_ON: &str = "ToggleOn";
const TOGGLE_OFF: &str = "ToggleOff";
const PICK_UP: &str = "PickUp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::R1, Rule::R2, Rule::R3, Rule::R4];

    pub fn name(self) -> &'static str {
        match self {
            Rule::R1 => "adjacent-duplicate",
            Rule::R2 => "inverse-toggle-pair",
            Rule::R3 => "premature-toggle-off",
            Rule::R4 => "orphan-pickup",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}", self, self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleHit {
    pub rule: Rule,
    pub index: usize,
    pub reason: String,
}

/// Every rule hit in rule order, before merging hits on the same index.
pub fn rule_hits(plan: &Plan) -> Vec<RuleHit> {
    let actions = plan.actions();
    let mut hits = Vec::new();
    let mut hit = |rule: Rule, index: usize, detail: String| {
        hits.push(RuleHit { rule, index, reason: format!("{rule}: {detail}") });
    };

    for pair in actions.windows(2) {
        if pair[0].step == pair[1].step {
            hit(Rule::R1, pair[1].index, format!("repeats action {} `{}`", pair[0].index, pair[0].step));
        }
    }

    for pair in actions.windows(2) {
        let (a, b) = (&pair[0].step, &pair[1].step);
        let inverse = (a.verb == TOGGLE_ON && b.verb == TOGGLE_OFF) || (a.verb == TOGGLE_OFF && b.verb == TOGGLE_ON);
        if let (true, Some(x)) = (inverse, a.object()) {
            if b.object() == Some(x) {
                let detail = format!("`{a}` and `{b}` cancel out on {x}");
                hit(Rule::R2, pair[0].index, detail.clone());
                hit(Rule::R2, pair[1].index, detail);
            }
        }
    }

    for (i, a) in actions.iter().enumerate() {
        let Some(x) = a.step.object().filter(|_| a.step.verb == TOGGLE_OFF) else { continue };
        let turned_on = actions[..i].iter().any(|b| b.step.verb == TOGGLE_ON && b.step.object() == Some(x));
        if !turned_on {
            hit(Rule::R3, a.index, format!("turns off {x} before it was turned on"));
        }
    }

    for (i, a) in actions.iter().enumerate() {
        let Some(x) = a.step.object().filter(|_| a.step.verb == PICK_UP) else { continue };
        if !actions[i + 1..].iter().any(|b| b.step.mentions(x)) {
            hit(Rule::R4, a.index, format!("picks up {x} which is never used afterwards"));
        }
    }

    hits
}

/// Applies R1–R4 and returns the merged removal critiques.
pub fn rule_judge_evaluate(plan: &Plan) -> CritiqueSet {
    let hits = rule_hits(plan);
    let raw: String = hits
        .iter()
        .map(|h| format!("{}. {} -> {}\n", h.index, plan.get(h.index).expect("hit in range"), h.reason))
        .collect();
    let critiques = hits
        .into_iter()
        .map(|h| Critique::Remove { index: h.index, id: plan.get(h.index).expect("hit in range").id, reason: h.reason })
        .collect();
    normalize_critiques(CritiqueSet::new(critiques, raw))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleJudge;

impl Judge for RuleJudge {
    fn identity(&self) -> JudgeIdentity {
        JudgeIdentity::new("rules", "r1-r4")
    }

    fn evaluate(&self, _goal: &str, plan: &Plan) -> Result<JudgeOutcome, JudgeError> {
        Ok(JudgeOutcome::new(rule_judge_evaluate(plan)))
    }
}
