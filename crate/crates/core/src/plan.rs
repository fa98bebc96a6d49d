//! Action-sequence data model and the action DSL.
//!
//! An action line looks like `Driver.PickUp('Soap')`: an actor, a dot, an
//! UpperCamelCase verb and a parenthesised argument list. String arguments
//! are single-quoted, numeric arguments are plain decimals. Trailing `//`
//! comments are stripped.
//!
//! Every [`Action`] carries an [`ActionId`] assigned when the plan is first
//! built. Ids are never reused, so removals and insertions can be tracked
//! across refinement rounds even though the 1-based `index` shifts.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Stable identity of an action within one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Actor {
    Driver,
    Commander,
}

impl Actor {
    pub fn as_str(self) -> &'static str {
        match self {
            Actor::Driver => "Driver",
            Actor::Commander => "Commander",
        }
    }
}

/// A decimal number kept in canonical textual form.
///
/// Canonical form has no leading `+`, no redundant leading zeros, no
/// trailing fractional zeros and no trailing `.`, so `90`, `90.0` and
/// `090.00` all compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Number(String);

impl Number {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn value(&self) -> f64 {
        self.0.parse().expect("canonical number text is a valid f64")
    }

    fn canonicalize(text: &str) -> Option<Number> {
        let (negative, body) = match text.as_bytes().first()? {
            b'-' => (true, &text[1..]),
            b'+' => (false, &text[1..]),
            _ => (false, text),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty()
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || (body.contains('.') && frac_part.is_empty())
        {
            return None;
        }
        let int_part = int_part.trim_start_matches('0');
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        let frac_part = frac_part.trim_end_matches('0');
        let mut out = String::new();
        if negative && !(int_part == "0" && frac_part.is_empty()) {
            out.push('-');
        }
        out.push_str(int_part);
        if !frac_part.is_empty() {
            out.push('.');
            out.push_str(frac_part);
        }
        Some(Number(out))
    }
}

impl FromStr for Number {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Number::canonicalize(s).ok_or(())
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Str(String),
    Num(Number),
}

impl Arg {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Arg::Str(s) => Some(s),
            Arg::Num(_) => None,
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Str(s) => write!(f, "'{s}'"),
            Arg::Num(n) => write!(f, "{n}"),
        }
    }
}

/// The content of an action without its identity: who does what to what.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub actor: Actor,
    pub verb: String,
    pub args: Vec<Arg>,
}

impl Step {
    pub fn new(actor: Actor, verb: impl Into<String>, args: Vec<Arg>) -> Self {
        Step { actor, verb: verb.into(), args }
    }

    /// First string argument, which is the manipulated object for most verbs.
    pub fn object(&self) -> Option<&str> {
        self.args.first().and_then(Arg::as_str)
    }

    pub fn mentions(&self, object: &str) -> bool {
        self.args.iter().any(|a| a.as_str() == Some(object))
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.actor.as_str(), self.verb)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Step {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl Serialize for Step {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Step {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_action(&text).map_err(serde::de::Error::custom)
    }
}

/// One step of a plan together with its identity and current position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub id: ActionId,
    pub index: usize,
    #[serde(rename = "action")]
    pub step: Step,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.step.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnknownActor(String),
    EmptyVerb,
    InvalidVerb(String),
    VerbNotAllowed(String),
    Expected(&'static str),
    UnterminatedString,
    InvalidNumber(String),
    TrailingInput,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyInput => f.write_str("empty action"),
            ParseErrorKind::UnknownActor(a) => write!(f, "unknown actor `{a}`"),
            ParseErrorKind::EmptyVerb => f.write_str("empty verb"),
            ParseErrorKind::InvalidVerb(v) => write!(f, "verb `{v}` is not UpperCamelCase"),
            ParseErrorKind::VerbNotAllowed(v) => write!(f, "verb `{v}` is not in the allowed verb set"),
            ParseErrorKind::Expected(what) => write!(f, "expected {what}"),
            ParseErrorKind::UnterminatedString => f.write_str("unterminated string argument"),
            ParseErrorKind::InvalidNumber(n) => write!(f, "invalid number `{n}`"),
            ParseErrorKind::TrailingInput => f.write_str("unexpected input after `)`"),
        }
    }
}

/// Parse failure with a 0-based character column into the original line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {kind}")]
pub struct ParseError {
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {error}")]
pub struct LineError {
    pub line: usize,
    pub error: ParseError,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("plan has no actions")]
    EmptyPlan,
    #[error("{} malformed action line(s): {}", .0.len(), join_errors(.0))]
    Lines(Vec<LineError>),
    #[error("plan text must start with a `GOAL:` line")]
    MissingGoal,
    #[error("invalid plan: {0}")]
    Invalid(String),
}

fn join_errors(errors: &[LineError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Action line parser. The default parser accepts any UpperCamelCase verb;
/// [`ActionParser::strict`] restricts verbs to a whitelist.
#[derive(Debug, Clone, Default)]
pub struct ActionParser {
    verbs: Option<BTreeSet<String>>,
}

impl ActionParser {
    pub fn open() -> Self {
        Self::default()
    }

    pub fn strict<I, S>(verbs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ActionParser { verbs: Some(verbs.into_iter().map(Into::into).collect()) }
    }

    pub fn parse(&self, line: &str) -> Result<Step, ParseError> {
        let chars: Vec<char> = strip_comment(line).chars().collect();
        let mut cursor = Cursor { chars: &chars, pos: 0 };
        cursor.skip_ws();
        if cursor.at_end() {
            return Err(cursor.error(ParseErrorKind::EmptyInput));
        }

        let actor_start = cursor.pos;
        let actor_text = cursor.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        let actor = match actor_text.as_str() {
            "Driver" => Actor::Driver,
            "Commander" => Actor::Commander,
            _ => return Err(ParseError { column: actor_start, kind: ParseErrorKind::UnknownActor(actor_text) }),
        };
        cursor.expect('.', "`.` after actor")?;

        let verb_start = cursor.pos;
        let verb = cursor.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        if verb.is_empty() {
            return Err(ParseError { column: verb_start, kind: ParseErrorKind::EmptyVerb });
        }
        if !is_verb(&verb) {
            return Err(ParseError { column: verb_start, kind: ParseErrorKind::InvalidVerb(verb) });
        }
        if let Some(allowed) = &self.verbs {
            if !allowed.contains(&verb) {
                return Err(ParseError { column: verb_start, kind: ParseErrorKind::VerbNotAllowed(verb) });
            }
        }

        cursor.skip_ws();
        cursor.expect('(', "`(` after verb")?;
        let mut args = Vec::new();
        cursor.skip_ws();
        if cursor.peek() != Some(')') {
            loop {
                cursor.skip_ws();
                args.push(cursor.arg()?);
                cursor.skip_ws();
                match cursor.peek() {
                    Some(',') => cursor.pos += 1,
                    Some(')') => break,
                    _ => return Err(cursor.error(ParseErrorKind::Expected("`,` or `)`"))),
                }
            }
        }
        cursor.expect(')', "`)`")?;
        cursor.skip_ws();
        if !cursor.at_end() {
            return Err(cursor.error(ParseErrorKind::TrailingInput));
        }
        Ok(Step { actor, verb, args })
    }
}

fn is_verb(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase()) && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Drops a trailing `//` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    let bytes = line.as_bytes();
    for i in 0..bytes.len() {
        match bytes[i] {
            b'\'' => in_string = !in_string,
            b'/' if !in_string && bytes.get(i + 1) == Some(&b'/') => return &line[..i],
            _ => {}
        }
    }
    line
}

struct Cursor<'a> {
    chars: &'a [char],
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if pred(c)) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { column: self.pos, kind }
    }

    fn expect(&mut self, c: char, what: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(ParseErrorKind::Expected(what)))
        }
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        match self.peek() {
            Some('\'') => {
                let start = self.pos;
                self.pos += 1;
                let text = self.take_while(|c| c != '\'');
                if self.at_end() {
                    return Err(ParseError { column: start, kind: ParseErrorKind::UnterminatedString });
                }
                self.pos += 1;
                Ok(Arg::Str(text))
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = self.pos;
                let text = self.take_while(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'));
                Number::canonicalize(&text)
                    .map(Arg::Num)
                    .ok_or(ParseError { column: start, kind: ParseErrorKind::InvalidNumber(text) })
            }
            _ => Err(self.error(ParseErrorKind::Expected("a quoted string or a number"))),
        }
    }
}

/// Parses one DSL line with the open-verb grammar.
pub fn parse_action(text: &str) -> Result<Step, ParseError> {
    ActionParser::open().parse(text)
}

/// Canonical rendering: no interior whitespace, single-quoted strings and
/// numbers without a trailing `.0`.
pub fn format_action(step: &Step) -> String {
    step.to_string()
}

/// An ordered action list pursuing a natural-language goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct Plan {
    pub goal: String,
    actions: Vec<Action>,
    next_id: u32,
}

#[derive(Deserialize)]
struct RawPlan {
    goal: String,
    actions: Vec<Action>,
    next_id: u32,
}

impl TryFrom<RawPlan> for Plan {
    type Error = PlanError;

    fn try_from(raw: RawPlan) -> Result<Self, Self::Error> {
        let mut seen = HashSet::new();
        for (i, a) in raw.actions.iter().enumerate() {
            if a.index != i + 1 {
                return Err(PlanError::Invalid(format!("action {} has index {}", i + 1, a.index)));
            }
            if !seen.insert(a.id) || a.id.0 >= raw.next_id {
                return Err(PlanError::Invalid(format!("bad or duplicate action id {}", a.id)));
            }
        }
        Ok(Plan { goal: raw.goal, actions: raw.actions, next_id: raw.next_id })
    }
}

impl Plan {
    /// Builds a plan assigning ids `1..=n` in order.
    pub fn from_steps(goal: impl Into<String>, steps: impl IntoIterator<Item = Step>) -> Self {
        let mut plan = Plan { goal: goal.into(), actions: Vec::new(), next_id: 1 };
        for step in steps {
            let id = plan.fresh_id();
            let index = plan.actions.len() + 1;
            plan.actions.push(Action { id, index, step });
        }
        plan
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.actions.iter().map(|a| a.id)
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> + '_ {
        self.actions.iter().map(|a| &a.step)
    }

    pub fn get(&self, index: usize) -> Option<&Action> {
        index.checked_sub(1).and_then(|i| self.actions.get(i))
    }

    pub fn position_of(&self, id: ActionId) -> Option<usize> {
        self.actions.iter().position(|a| a.id == id).map(|p| p + 1)
    }

    pub fn contains(&self, id: ActionId) -> bool {
        self.actions.iter().any(|a| a.id == id)
    }

    /// Id that will be handed to the next inserted action.
    pub fn next_id(&self) -> ActionId {
        ActionId(self.next_id)
    }

    pub fn fresh_id(&mut self) -> ActionId {
        let id = ActionId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Same step sequence, ignoring ids and the goal.
    pub fn same_steps(&self, other: &Plan) -> bool {
        self.steps().eq(other.steps())
    }

    pub fn canonical_lines(&self) -> Vec<String> {
        self.steps().map(ToString::to_string).collect()
    }

    /// Keeps only actions satisfying `keep`, preserving order. Indices are
    /// left stale until [`Plan::reindex`].
    pub fn retain(&mut self, keep: impl FnMut(&Action) -> bool) {
        self.actions.retain(keep);
    }

    /// Inserts a step with a fresh id at 0-based slot `at`.
    pub fn insert(&mut self, at: usize, step: Step) -> ActionId {
        let id = self.fresh_id();
        self.actions.insert(at, Action { id, index: 0, step });
        id
    }

    pub fn reindex(&mut self) {
        for (i, a) in self.actions.iter_mut().enumerate() {
            a.index = i + 1;
        }
    }

    /// Plan text format: a `GOAL:` line followed by one action per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("GOAL: {}\n", self.goal);
        for line in self.canonical_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Plan, PlanError> {
        let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.trim().is_empty());
        let goal = match lines.next() {
            Some((_, first)) => {
                let first = first.trim();
                let first = first.strip_prefix("//").map(str::trim).unwrap_or(first);
                first.strip_prefix("GOAL:").ok_or(PlanError::MissingGoal)?.trim().to_string()
            }
            None => return Err(PlanError::MissingGoal),
        };
        parse_numbered_lines(goal, lines.map(|(i, l)| (i + 1, l)))
    }
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#') || t.starts_with("//")
}

fn parse_numbered_lines<'a>(goal: String, lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Plan, PlanError> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for (line, text) in lines {
        if is_skippable(text) {
            continue;
        }
        match parse_action(text) {
            Ok(step) => steps.push(step),
            Err(error) => errors.push(LineError { line, error }),
        }
    }
    if !errors.is_empty() {
        return Err(PlanError::Lines(errors));
    }
    if steps.is_empty() {
        return Err(PlanError::EmptyPlan);
    }
    Ok(Plan::from_steps(goal, steps))
}

/// Parses DSL lines into a plan. Blank lines and `#`/`//` comment lines are
/// skipped; every other line must parse. Errors carry 1-based line numbers.
pub fn parse_plan<S: AsRef<str>>(goal: &str, lines: &[S]) -> Result<Plan, PlanError> {
    parse_numbered_lines(goal.to_string(), lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_ref())))
}

/// Rewrites indices to `1..=n`, keeping order and ids.
pub fn reindex(mut plan: Plan) -> Plan {
    plan.reindex();
    plan
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingDescriptor {
    pub verb: String,
    pub object: String,
    #[serde(default)]
    pub note: String,
}

/// Ground truth for one episode: which actions are erroneous and which
/// required steps are absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub remove_ids: BTreeSet<ActionId>,
    pub missing_steps: Vec<MissingDescriptor>,
}

impl ErrorAnnotation {
    pub fn positives(&self) -> usize {
        self.remove_ids.len() + self.missing_steps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    #[serde(default)]
    pub context: String,
    pub initial_plan: Plan,
    #[serde(default)]
    pub annotations: Option<ErrorAnnotation>,
}

impl Episode {
    pub fn goal(&self) -> &str {
        &self.initial_plan.goal
    }
}
