//! Judge findings and the parser for tagged judge replies.
//!
//! A reply is a sequence of blocks:
//!
//! ```text
//! ACTION: <action text, optionally prefixed by its 1-based index>
//! ANNOTATION: <free text, may contain "#REMOVE: reason">
//! ...
//! #MISSING: <description>
//! ```
//!
//! Tags are case-insensitive. Each block containing `#REMOVE` becomes a
//! [`Critique::Remove`] bound to one action of the judged plan; every
//! `#MISSING` line becomes a [`Critique::Missing`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{parse_action, ActionId, Plan, Step};

const DEFAULT_REMOVE_REASON: &str = "flagged for removal";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Critique {
    Remove {
        index: usize,
        id: ActionId,
        reason: String,
    },
    Missing {
        description: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        insert_after: Option<usize>,
    },
}

impl Critique {
    pub fn is_remove(&self) -> bool {
        matches!(self, Critique::Remove { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueSet {
    pub critiques: Vec<Critique>,
    #[serde(default)]
    pub raw_text: String,
}

impl CritiqueSet {
    pub fn new(critiques: Vec<Critique>, raw_text: impl Into<String>) -> Self {
        CritiqueSet { critiques, raw_text: raw_text.into() }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.critiques.is_empty()
    }

    pub fn len(&self) -> usize {
        self.critiques.len()
    }

    pub fn removes(&self) -> impl Iterator<Item = (usize, ActionId, &str)> + '_ {
        self.critiques.iter().filter_map(|c| match c {
            Critique::Remove { index, id, reason } => Some((*index, *id, reason.as_str())),
            Critique::Missing { .. } => None,
        })
    }

    pub fn missing(&self) -> impl Iterator<Item = (&str, Option<usize>)> + '_ {
        self.critiques.iter().filter_map(|c| match c {
            Critique::Missing { description, insert_after } => Some((description.as_str(), *insert_after)),
            Critique::Remove { .. } => None,
        })
    }
}

/// Non-fatal oddities found while parsing a reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum ParseWarning {
    /// A `#REMOVE` block whose action could not be bound; the flag is dropped.
    UnboundRemove {
        block: usize,
        action_text: String,
    },
    BlockCountMismatch {
        blocks: usize,
        actions: usize,
    },
    /// A `#REMOVE` tag before the first `ACTION:` line.
    OrphanRemove {
        reason: String,
    },
    EmptyReply,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("judge reply contains no ACTION blocks and no tags")]
pub struct MalformedOutput;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedReply {
    pub set: CritiqueSet,
    pub warnings: Vec<ParseWarning>,
}

struct Block {
    action_line: String,
    body: Vec<String>,
}

/// Strips list bullets and markdown emphasis that models like to wrap
/// around tags.
fn clean_line(line: &str) -> &str {
    let mut t = line.trim();
    loop {
        let before = t;
        t = t.trim_start_matches(['*', '_', '>', '`']).trim_start();
        if let Some(rest) = t.strip_prefix("- ") {
            t = rest.trim_start();
        }
        if t == before {
            return t;
        }
    }
}

/// If `line` starts with `tag:` (case-insensitive), returns the remainder.
fn strip_tag<'a>(line: &'a str, tag: &str) -> Option<&'a str> {
    let head = line.get(..tag.len())?;
    if !head.eq_ignore_ascii_case(tag) {
        return None;
    }
    let rest = line[tag.len()..].trim_start_matches(['*', '_']);
    let rest = rest.trim_start();
    if tag.starts_with('#') {
        // `#REMOVE` tags allow a missing colon
        Some(rest.strip_prefix(':').unwrap_or(rest))
    } else {
        rest.strip_prefix(':')
    }
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let hay = haystack.to_ascii_lowercase();
    hay.find(&needle.to_ascii_lowercase())
}

/// Strips an index prefix like `3.`, `3)` or `[3]` plus wrapping brackets
/// and backticks. Returns the explicit index if one was present.
fn split_action_text(text: &str) -> (Option<usize>, &str) {
    let mut t = text.trim().trim_matches(['`', '*']).trim();
    let mut index = None;
    let digits: String = t.trim_start_matches('[').chars().take_while(char::is_ascii_digit).collect();
    if !digits.is_empty() {
        let offset = t.len() - t.trim_start_matches('[').len() + digits.len();
        let rest = &t[offset..];
        if let Some(rest) = rest.strip_prefix(['.', ')', ']', ':']) {
            index = digits.parse().ok();
            t = rest.trim();
        }
    }
    if t.starts_with('[') && t.ends_with(']') {
        t = t[1..t.len() - 1].trim();
    }
    (index, t.trim_matches('`').trim())
}

/// Finds every DSL action mentioned anywhere in free text.
pub(crate) fn actions_in_text(text: &str) -> Vec<(usize, Step)> {
    let mut found = Vec::new();
    for actor in ["Driver.", "Commander."] {
        let mut from = 0;
        while let Some(off) = text[from..].find(actor) {
            let start = from + off;
            if let Some(close) = text[start..].find(')') {
                if let Ok(step) = parse_action(&text[start..=start + close]) {
                    found.push((start, step));
                }
            }
            from = start + actor.len();
        }
    }
    found.sort_by_key(|(at, _)| *at);
    found
}

fn unique_match(plan: &Plan, step: &Step) -> Option<usize> {
    let mut hits = plan.actions().iter().filter(|a| &a.step == step);
    let first = hits.next()?;
    hits.next().is_none().then_some(first.index)
}

/// Binds an ACTION line to a plan position: unique canonical match first,
/// then an explicit index prefix that agrees with the text, then the block
/// ordinal.
fn bind(plan: &Plan, action_line: &str, ordinal: usize) -> Option<usize> {
    let (explicit, text) = split_action_text(action_line);
    if let Ok(step) = parse_action(text) {
        if let Some(index) = unique_match(plan, &step) {
            return Some(index);
        }
        if let Some(i) = explicit {
            if plan.get(i).is_some_and(|a| a.step == step) {
                return Some(i);
            }
        }
    }
    (ordinal <= plan.len()).then_some(ordinal)
}

fn resolve_insert_after(plan: &Plan, description: &str) -> usize {
    if let Some(at) = find_ci(description, "before ") {
        let tail = &description[at..];
        if let Some((_, step)) = actions_in_text(tail).into_iter().next() {
            if let Some(index) = unique_match(plan, &step) {
                return index - 1;
            }
        }
    }
    plan.len()
}

/// Parses a judge reply against the exact plan that was shown to the judge.
pub fn parse_judge_output(text: &str, plan: &Plan) -> Result<ParsedReply, MalformedOutput> {
    let mut warnings = Vec::new();
    if text.trim().is_empty() {
        warnings.push(ParseWarning::EmptyReply);
        return Ok(ParsedReply { set: CritiqueSet::new(Vec::new(), text), warnings });
    }

    let mut blocks: Vec<Block> = Vec::new();
    let mut preamble: Vec<String> = Vec::new();
    let mut missing: Vec<Vec<String>> = Vec::new();
    // where continuation lines go: 0 = current block, 1 = current #MISSING
    let mut in_missing = false;
    let mut tags = 0usize;

    for raw in text.lines() {
        let line = clean_line(raw);
        if let Some(rest) = strip_tag(line, "ACTION") {
            blocks.push(Block { action_line: rest.trim().to_string(), body: Vec::new() });
            in_missing = false;
        } else if let Some(rest) = strip_tag(line, "#MISSING") {
            tags += 1;
            missing.push(vec![rest.trim().to_string()]);
            in_missing = true;
        } else if in_missing {
            if line.is_empty() {
                in_missing = false;
            } else {
                missing.last_mut().expect("in_missing implies an entry").push(line.to_string());
            }
        } else if let Some(block) = blocks.last_mut() {
            block.body.push(line.to_string());
        } else {
            preamble.push(line.to_string());
        }
    }

    let mut critiques = Vec::new();
    let preamble_text = preamble.join("\n");
    if let Some(at) = find_ci(&preamble_text, "#remove") {
        tags += 1;
        let reason = strip_tag(&preamble_text[at..], "#REMOVE").unwrap_or_default();
        warnings.push(ParseWarning::OrphanRemove { reason: collapse_ws(reason) });
    }

    for (k, block) in blocks.iter().enumerate() {
        let body = block.body.join("\n");
        let Some(at) = find_ci(&body, "#remove") else { continue };
        tags += 1;
        let reason = collapse_ws(strip_tag(&body[at..], "#REMOVE").unwrap_or_default());
        let reason = if reason.is_empty() { DEFAULT_REMOVE_REASON.to_string() } else { reason };
        match bind(plan, &block.action_line, k + 1) {
            Some(index) => {
                let id = plan.get(index).expect("bound index is in range").id;
                critiques.push(Critique::Remove { index, id, reason });
            }
            None => {
                tracing::warn!(block = k + 1, "dropping unbound #REMOVE block");
                warnings.push(ParseWarning::UnboundRemove { block: k + 1, action_text: block.action_line.clone() });
            }
        }
    }

    for parts in &missing {
        let description = collapse_ws(&parts.join(" "));
        if description.is_empty() {
            continue;
        }
        let insert_after = resolve_insert_after(plan, &description);
        critiques.push(Critique::Missing { description, insert_after: Some(insert_after) });
    }

    if blocks.is_empty() && tags == 0 {
        return Err(MalformedOutput);
    }
    if !blocks.is_empty() && blocks.len() != plan.len() {
        warnings.push(ParseWarning::BlockCountMismatch { blocks: blocks.len(), actions: plan.len() });
    }
    Ok(ParsedReply { set: CritiqueSet::new(critiques, text), warnings })
}

fn normalized_description(text: &str) -> String {
    collapse_ws(text).to_lowercase()
}

/// Merges removals on the same index and drops repeated omissions.
/// Output order: removals by ascending index, then omissions in arrival
/// order.
pub fn normalize_critiques(cs: CritiqueSet) -> CritiqueSet {
    let mut removes: BTreeMap<usize, (ActionId, Vec<String>)> = BTreeMap::new();
    let mut missing: Vec<Critique> = Vec::new();
    let mut seen_missing = Vec::new();
    for critique in cs.critiques {
        match critique {
            Critique::Remove { index, id, reason } => {
                let entry = removes.entry(index).or_insert_with(|| (id, Vec::new()));
                for part in reason.split("; ") {
                    if !entry.1.iter().any(|r| r == part) {
                        entry.1.push(part.to_string());
                    }
                }
            }
            Critique::Missing { ref description, .. } => {
                let key = normalized_description(description);
                if !seen_missing.contains(&key) {
                    seen_missing.push(key);
                    missing.push(critique);
                }
            }
        }
    }
    let mut critiques: Vec<Critique> = removes
        .into_iter()
        .map(|(index, (id, reasons))| Critique::Remove { index, id, reason: reasons.join("; ") })
        .collect();
    critiques.extend(missing);
    CritiqueSet { critiques, raw_text: cs.raw_text }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::parse_plan;
    use proptest::prelude::*;

    fn microwave_plan() -> Plan {
        parse_plan(
            "Heat the potato",
            &[
                "Driver.Open('Microwave')",
                "Driver.PickUp('Potato')",
                "Driver.ToggleOff('Microwave')",
                "Driver.Place('Microwave')",
                "Driver.ToggleOn('Microwave')",
            ],
        )
        .unwrap()
    }

    fn block(action: &str, annotation: &str) -> String {
        format!("ACTION: {action}\nANNOTATION: {annotation}\n")
    }

    #[test]
    fn remove_on_third_block() {
        let plan = microwave_plan();
        let reply = [
            block("Driver.Open('Microwave')", "Opens the microwave, needed."),
            block("Driver.PickUp('Potato')", "Needed."),
            block(
                "Driver.ToggleOff('Microwave')",
                "Turning it off first makes no sense.\n#REMOVE: Driver toggles off microwave before turning it on",
            ),
            block("Driver.Place('Microwave')", "Needed."),
            block("Driver.ToggleOn('Microwave')", "Needed."),
        ]
        .concat();
        let parsed = parse_judge_output(&reply, &plan).unwrap();
        assert!(parsed.warnings.is_empty());
        assert_eq!(
            parsed.set.critiques,
            vec![Critique::Remove {
                index: 3,
                id: plan.get(3).unwrap().id,
                reason: "Driver toggles off microwave before turning it on".into(),
            }]
        );
        assert_eq!(parsed.set.raw_text, reply);
    }

    #[test]
    fn all_good_reply_yields_nothing() {
        let plan = microwave_plan();
        let reply: String = plan.actions().iter().map(|a| block(&a.step.to_string(), "looks good")).collect();
        let parsed = parse_judge_output(&reply, &plan).unwrap();
        assert!(parsed.set.is_empty());
    }

    #[test]
    fn trailing_missing_goes_to_end() {
        let plan = microwave_plan();
        let mut reply: String = plan.actions().iter().map(|a| block(&a.step.to_string(), "fine")).collect();
        reply.push_str("#MISSING: Task incomplete – bread sliced but sandwich not assembled\n");
        let parsed = parse_judge_output(&reply, &plan).unwrap();
        assert_eq!(
            parsed.set.critiques,
            vec![Critique::Missing {
                description: "Task incomplete – bread sliced but sandwich not assembled".into(),
                insert_after: Some(5),
            }]
        );
    }

    #[test]
    fn missing_before_an_action_resolves_position() {
        let plan = microwave_plan();
        let reply = "#missing: close the door before Driver.ToggleOn('Microwave')\n";
        let parsed = parse_judge_output(reply, &plan).unwrap();
        assert_eq!(parsed.set.missing().next().unwrap().1, Some(4));
    }

    #[test]
    fn tags_are_case_insensitive_and_tolerate_markdown() {
        let plan = microwave_plan();
        let reply =
            "**Action:** 3. `Driver.ToggleOff('Microwave')`\n**Annotation:** premature. #remove: off before on\n";
        let parsed = parse_judge_output(reply, &plan).unwrap();
        assert_eq!(parsed.set.removes().map(|r| (r.0, r.2)).collect::<Vec<_>>(), vec![(3, "off before on")]);
    }

    #[test]
    fn ambiguous_text_uses_index_prefix_then_ordinal() {
        let plan = parse_plan(
            "Set table",
            &["Driver.PickUp('Plate')", "Driver.Place('DiningTable')", "Driver.PickUp('Plate')"],
        )
        .unwrap();
        let reply = "ACTION: 3. Driver.PickUp('Plate')\nANNOTATION: #REMOVE: again\n";
        let parsed = parse_judge_output(reply, &plan).unwrap();
        assert_eq!(parsed.set.removes().next().unwrap().0, 3);

        // no index prefix: falls back to the block ordinal
        let reply = [
            block("Driver.PickUp('Plate')", "ok"),
            block("Driver.Place('DiningTable')", "ok"),
            block("Driver.PickUp('Plate')", "#REMOVE: duplicate"),
        ]
        .concat();
        let parsed = parse_judge_output(&reply, &plan).unwrap();
        assert_eq!(parsed.set.removes().next().unwrap().0, 3);
    }

    #[test]
    fn unbound_remove_is_dropped_with_warning() {
        let plan = parse_plan("g", &["Driver.Stop()"]).unwrap();
        let reply = [block("Driver.Stop()", "fine"), block("Driver.Jump()", "#REMOVE: not in plan")].concat();
        let parsed = parse_judge_output(&reply, &plan).unwrap();
        assert!(parsed.set.is_empty());
        assert!(parsed
            .warnings
            .contains(&ParseWarning::UnboundRemove { block: 2, action_text: "Driver.Jump()".into() }));
        assert!(parsed.warnings.contains(&ParseWarning::BlockCountMismatch { blocks: 2, actions: 1 }));
    }

    #[test]
    fn prose_without_format_is_malformed() {
        let plan = microwave_plan();
        assert_eq!(parse_judge_output("I think the plan is fine overall.", &plan), Err(MalformedOutput));
        let parsed = parse_judge_output("   \n", &plan).unwrap();
        assert_eq!(parsed.warnings, vec![ParseWarning::EmptyReply]);
    }

    #[test]
    fn normalize_merges_and_orders() {
        let id = ActionId(9);
        let cs = CritiqueSet::new(
            vec![
                Critique::Missing { description: "d1".into(), insert_after: None },
                Critique::Remove { index: 5, id: ActionId(5), reason: "b".into() },
                Critique::Remove { index: 2, id: ActionId(2), reason: "a".into() },
                Critique::Remove { index: 4, id, reason: "first".into() },
                Critique::Remove { index: 4, id, reason: "second".into() },
                Critique::Missing { description: "  D1 ".into(), insert_after: None },
            ],
            "raw",
        );
        let out = normalize_critiques(cs);
        assert_eq!(
            out.critiques,
            vec![
                Critique::Remove { index: 2, id: ActionId(2), reason: "a".into() },
                Critique::Remove { index: 4, id, reason: "first; second".into() },
                Critique::Remove { index: 5, id: ActionId(5), reason: "b".into() },
                Critique::Missing { description: "d1".into(), insert_after: None },
            ]
        );
        assert_eq!(out.raw_text, "raw");
        assert_eq!(normalize_critiques(CritiqueSet::empty()), CritiqueSet::empty());
    }

    /// Test-only: renders a reply in the judge grammar for a known set of
    /// findings against `plan`.
    fn synthesize(plan: &Plan, cs: &CritiqueSet) -> String {
        let mut out = String::from("Here is my line-by-line analysis.\n\n");
        for a in plan.actions() {
            out.push_str(&format!("ACTION: {}. {}\nANNOTATION: ", a.index, a.step));
            match cs.removes().find(|r| r.0 == a.index) {
                Some((_, _, reason)) => out.push_str(&format!("Not needed.\n#REMOVE: {reason}\n\n")),
                None => out.push_str("Needed for the goal.\n\n"),
            }
        }
        for (d, _) in cs.missing() {
            out.push_str(&format!("#MISSING: {d}\n"));
        }
        out
    }

    fn arb_case() -> impl Strategy<Value = (Plan, CritiqueSet)> {
        let line = prop_oneof![
            Just("Driver.PickUp('Plate')"),
            Just("Driver.Place('Sink')"),
            Just("Driver.ToggleOn('Microwave')"),
            Just("Driver.Move(2)"),
            Just("Driver.Turn(90)"),
        ];
        (proptest::collection::vec(line, 1..12), proptest::collection::vec(any::<bool>(), 12), 0usize..3).prop_map(
            |(lines, flags, n_missing)| {
                let plan = parse_plan("g", &lines).unwrap();
                let mut critiques: Vec<Critique> = plan
                    .actions()
                    .iter()
                    .filter(|a| flags[a.index - 1])
                    .map(|a| Critique::Remove { index: a.index, id: a.id, reason: format!("reason {}", a.index) })
                    .collect();
                for m in 0..n_missing {
                    critiques.push(Critique::Missing {
                        description: format!("need step {m}"),
                        insert_after: Some(plan.len()),
                    });
                }
                (plan, CritiqueSet::new(critiques, ""))
            },
        )
    }

    proptest! {
        #[test]
        fn parse_inverts_synthesize((plan, cs) in arb_case()) {
            let reply = synthesize(&plan, &cs);
            let parsed = parse_judge_output(&reply, &plan).unwrap();
            prop_assert!(parsed.warnings.is_empty());
            prop_assert_eq!(parsed.set.critiques, cs.critiques);
        }

        #[test]
        fn parsing_is_total(text in "(?s).{0,300}") {
            let plan = parse_plan("g", &["Driver.Stop()", "Driver.Move(1)"]).unwrap();
            if let Ok(parsed) = parse_judge_output(&text, &plan) {
                for (index, id, reason) in parsed.set.removes() {
                    prop_assert!(index >= 1 && index <= plan.len());
                    prop_assert_eq!(plan.get(index).unwrap().id, id);
                    prop_assert!(!reason.is_empty());
                }
            }
        }

        #[test]
        fn normalize_is_idempotent((_plan, cs) in arb_case(), dup in 0usize..3) {
            let mut doubled = cs.clone();
            doubled.critiques.extend(cs.critiques.iter().take(dup).cloned());
            let once = normalize_critiques(doubled.clone());
            prop_assert!(once.len() <= doubled.len());
            prop_assert_eq!(normalize_critiques(once.clone()), once);
        }
    }
}
