//! The plan-update operator: applies a critique set to a plan.
//!
//! Removals are resolved by stable id, so several removals in one round
//! cannot shift each other. Omissions are only turned into actions when an
//! [`Inserter`] is configured; otherwise they are recorded as unresolved.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critique::CritiqueSet;
use crate::plan::{parse_action, Action, ActionId, ParseError, Plan, Step};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InserterError {
    #[error("proposed line `{line}` is not a valid action: {error}")]
    Parse { line: String, error: ParseError },
    #[error("inserter backend failed: {0}")]
    Backend(String),
    #[error("insert position {position} is past the end of a {len}-action plan")]
    Position { position: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanUpdateError {
    #[error("critique targets action {0} which is not in the plan")]
    StaleCritique(ActionId),
}

/// Proposes concrete action lines for a missing step.
pub trait Inserter: Send + Sync {
    fn label(&self) -> String;

    fn propose(&self, plan: &Plan, missing: &str) -> Result<Vec<String>, InserterError>;
}

/// Inserter with fixed proposals keyed by a case-insensitive substring of
/// the missing-step description.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptInserter {
    #[serde(default)]
    pub by_description: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub default: Vec<String>,
}

impl ScriptInserter {
    pub fn always(lines: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ScriptInserter { by_description: BTreeMap::new(), default: lines.into_iter().map(Into::into).collect() }
    }
}

impl Inserter for ScriptInserter {
    fn label(&self) -> String {
        "script".to_string()
    }

    fn propose(&self, _plan: &Plan, missing: &str) -> Result<Vec<String>, InserterError> {
        let lower = missing.to_lowercase();
        Ok(self
            .by_description
            .iter()
            .find(|(key, _)| lower.contains(&key.to_lowercase()))
            .map(|(_, lines)| lines.clone())
            .unwrap_or_else(|| self.default.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum OmissionCause {
    NoInserter,
    EmptyProposal,
    InserterFailed { error: String },
}

/// A missing-step critique that did not lead to an insertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Omission {
    pub description: String,
    #[serde(flatten)]
    pub cause: OmissionCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    /// 1-based position in the resulting plan.
    pub position: usize,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub removed: Vec<ActionId>,
    pub inserted: Vec<Insertion>,
    pub unresolved: Vec<Omission>,
    pub resulting_plan: Plan,
}

/// Asks the inserter for the lines filling `missing` and positions them
/// consecutively after `insert_after` (0 = before the first action).
pub fn resolve_missing(
    inserter: &dyn Inserter,
    plan: &Plan,
    missing: &str,
    insert_after: usize,
) -> Result<Vec<(usize, Step)>, InserterError> {
    if insert_after > plan.len() {
        return Err(InserterError::Position { position: insert_after, len: plan.len() });
    }
    let lines = inserter.propose(plan, missing)?;
    let mut out = Vec::with_capacity(lines.len());
    for line in lines.iter().filter(|l| !l.trim().is_empty()) {
        let step = parse_action(line).map_err(|error| InserterError::Parse { line: line.clone(), error })?;
        out.push((insert_after + out.len() + 1, step));
    }
    Ok(out)
}

/// Applies `cs` to `plan`. `cs` must be normalized and bound to `plan`.
pub fn apply_critiques(
    plan: &Plan,
    cs: &CritiqueSet,
    inserter: Option<&dyn Inserter>,
) -> Result<Revision, PlanUpdateError> {
    let mut removed = Vec::new();
    for (_, id, _) in cs.removes() {
        if !plan.contains(id) {
            return Err(PlanUpdateError::StaleCritique(id));
        }
        if !removed.contains(&id) {
            removed.push(id);
        }
    }
    let removed_set: HashSet<ActionId> = removed.iter().copied().collect();
    let mut working = plan.clone();
    working.retain(|a| !removed_set.contains(&a.id));
    working.reindex();

    let mut inserted_ids: Vec<ActionId> = Vec::new();
    let mut unresolved = Vec::new();
    for (description, insert_after) in cs.missing() {
        let Some(inserter) = inserter else {
            unresolved.push(Omission { description: description.to_string(), cause: OmissionCause::NoInserter });
            continue;
        };
        let slot = anchor_slot(plan, &working, &inserted_ids, insert_after.unwrap_or(plan.len()));
        match resolve_missing(inserter, &working, description, slot) {
            Ok(steps) if steps.is_empty() => {
                unresolved.push(Omission { description: description.to_string(), cause: OmissionCause::EmptyProposal })
            }
            Ok(steps) => {
                for (position, step) in steps {
                    inserted_ids.push(working.insert(position - 1, step));
                }
                working.reindex();
            }
            Err(e) => {
                tracing::warn!(error = %e, "omission left unresolved");
                unresolved.push(Omission {
                    description: description.to_string(),
                    cause: OmissionCause::InserterFailed { error: e.to_string() },
                });
            }
        }
    }

    let inserted = inserted_ids
        .iter()
        .map(|id| {
            let position = working.position_of(*id).expect("inserted id is present");
            Insertion { position, action: working.get(position).expect("position in range").clone() }
        })
        .collect();
    Ok(Revision { removed, inserted, unresolved, resulting_plan: working })
}

/// Number of actions in `working` that precede an insertion anchored after
/// `insert_after` in the judged plan. A removed anchor falls back to its
/// nearest surviving predecessor; earlier insertions at the same anchor
/// stay in front.
fn anchor_slot(judged: &Plan, working: &Plan, inserted: &[ActionId], insert_after: usize) -> usize {
    let anchor =
        judged.actions()[..insert_after.min(judged.len())].iter().rev().find_map(|a| working.position_of(a.id));
    let mut slot = anchor.unwrap_or(0);
    while working.get(slot + 1).is_some_and(|a| inserted.contains(&a.id)) {
        slot += 1;
    }
    slot
}
