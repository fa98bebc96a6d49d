//! Episode files on disk and synthetic corpora with exact ground truth.
//!
//! Synthetic corpora are reproducible across platforms: randomness comes
//! from ChaCha8 seeded with `seed_from_u64(seed)`, one stream per episode
//! ordinal. A uniform draw is `(next_u64 >> 11) * 2^-53` and a choice among
//! `n` items is `floor(uniform * n)`.

mod templates;

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judges::{ScriptBook, ScriptRound, ScriptTarget, ScriptedCritique};
use crate::plan::{
    parse_action, ActionId, Actor, Arg, Episode, ErrorAnnotation, MissingDescriptor, ParseError, Plan, Step,
};

pub use templates::{Template, TEMPLATES};

pub const EPISODE_EXT: &str = ".episode.json";

/// Objects for irrelevant pickups. Only those absent from a plan are used.
pub const DISTRACTORS: [&str; 12] = [
    "RemoteControl",
    "Newspaper",
    "Pillow",
    "Vase",
    "KeyChain",
    "CreditCard",
    "Watch",
    "Statue",
    "CellPhone",
    "Book",
    "TissueBox",
    "Pencil",
];

const FALLBACK_TOGGLE: &str = "LightSwitch";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {field}: {reason}", file.display())]
pub struct SchemaError {
    pub file: PathBuf,
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} invalid episode file(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<SchemaError>),
    #[error("no `*{EPISODE_EXT}` files in {0}")]
    EmptyCorpus(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("error profile: {0}")]
pub struct ProfileError(pub String);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFile {
    /// 1-based positions in `actions`.
    #[serde(default)]
    pub remove_indices: Vec<usize>,
    #[serde(default)]
    pub missing_steps: Vec<MissingDescriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    Duplicate,
    InversePair,
    IrrelevantPickup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedStep {
    /// 1-based position in the noisy plan.
    pub index: usize,
    pub kind: InjectionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletedStep {
    /// 1-based position in the clean plan.
    pub clean_index: usize,
    pub action: String,
}

/// How a synthetic episode was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub seed: u64,
    pub stream: u64,
    pub clean_actions: Vec<String>,
    pub injected: Vec<InjectedStep>,
    pub deleted: Vec<DeletedStep>,
}

/// One episode on disk. Every `actions` entry must be a single action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeFile {
    pub episode_id: String,
    #[serde(default)]
    pub context: String,
    pub goal: String,
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<AnnotationFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<InjectionRecord>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

impl EpisodeFile {
    pub fn to_episode(&self, file: &Path) -> Result<Episode, Vec<SchemaError>> {
        let err = |field: String, reason: String| SchemaError { file: file.to_path_buf(), field, reason };
        let mut errors = Vec::new();
        if !valid_id(&self.episode_id) {
            errors.push(err(
                "episode_id".into(),
                "must be nonempty and use only letters, digits, '-', '_' or '.'".into(),
            ));
        }
        if self.actions.is_empty() {
            errors.push(err("actions".into(), "plan is empty".into()));
        }
        let mut steps = Vec::with_capacity(self.actions.len());
        for (i, line) in self.actions.iter().enumerate() {
            match parse_action(line) {
                Ok(s) => steps.push(s),
                Err(e) => errors.push(err(format!("actions[{}]", i + 1), format!("`{line}`: {e}"))),
            }
        }
        let mut annotations = None;
        if let Some(a) = &self.annotations {
            let mut remove_ids = BTreeSet::new();
            for &i in &a.remove_indices {
                if i == 0 || i > self.actions.len() {
                    errors.push(err(
                        "annotations.remove_indices".into(),
                        format!("{i} is outside 1..={} (indices are 1-based)", self.actions.len()),
                    ));
                } else {
                    remove_ids.insert(ActionId(i as u32));
                }
            }
            for (k, m) in a.missing_steps.iter().enumerate() {
                if m.verb.trim().is_empty() {
                    errors.push(err(format!("annotations.missing_steps[{k}].verb"), "empty verb".into()));
                }
            }
            annotations = Some(ErrorAnnotation { remove_ids, missing_steps: a.missing_steps.clone() });
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(Episode {
            episode_id: self.episode_id.clone(),
            context: self.context.clone(),
            initial_plan: Plan::from_steps(self.goal.clone(), steps),
            annotations,
        })
    }
}

/// Loads every `*.episode.json` under `dir`, sorted by file name. Schema
/// problems are collected across all files before failing.
pub fn load_episodes(dir: &Path) -> Result<Vec<Episode>, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(EPISODE_EXT)))
        .collect();
    if paths.is_empty() {
        return Err(CorpusError::EmptyCorpus(dir.to_path_buf()));
    }
    paths.sort();
    let mut episodes = Vec::with_capacity(paths.len());
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let file: EpisodeFile = match serde_json::from_str(&text) {
            Ok(f) => f,
            Err(e) => {
                errors.push(SchemaError { file: path.clone(), field: "(document)".into(), reason: e.to_string() });
                continue;
            }
        };
        match file.to_episode(path) {
            Ok(ep) => {
                if !seen.insert(ep.episode_id.clone()) {
                    errors.push(SchemaError {
                        file: path.clone(),
                        field: "episode_id".into(),
                        reason: format!("duplicate id `{}`", ep.episode_id),
                    });
                }
                episodes.push(ep);
            }
            Err(mut e) => errors.append(&mut e),
        }
    }
    if !errors.is_empty() {
        return Err(CorpusError::Schema(errors));
    }
    tracing::debug!(count = episodes.len(), dir = %dir.display(), "loaded episodes");
    Ok(episodes)
}

/// Loads the raw episode files (including truth blocks), sorted by name.
pub fn load_episode_files(dir: &Path) -> Result<Vec<EpisodeFile>, CorpusError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(EPISODE_EXT)))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io { path: path.clone(), source })?;
        match serde_json::from_str(&text) {
            Ok(f) => out.push(f),
            Err(e) => errors.push(SchemaError { file: path, field: "(document)".into(), reason: e.to_string() }),
        }
    }
    if !errors.is_empty() {
        return Err(CorpusError::Schema(errors));
    }
    Ok(out)
}

pub fn write_episode_file(dir: &Path, file: &EpisodeFile) -> Result<PathBuf, CorpusError> {
    let path = dir.join(format!("{}{EPISODE_EXT}", file.episode_id));
    let mut text = serde_json::to_string_pretty(file).expect("episode files serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| CorpusError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// The pinned generator described in the module docs.
pub struct CorpusRng(ChaCha8Rng);

impl CorpusRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        CorpusRng(rng)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    pub fn chance(&mut self, rate: f64) -> bool {
        self.uniform() < rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub dup_rate: f64,
    pub inv_rate: f64,
    pub irr_rate: f64,
    pub del_rate: f64,
    pub seed: u64,
    /// Guarantee at least one injected error per plan.
    pub require_errors: bool,
}

impl Default for ErrorProfile {
    fn default() -> Self {
        ErrorProfile { dup_rate: 0.1, inv_rate: 0.05, irr_rate: 0.08, del_rate: 0.05, seed: 0, require_errors: false }
    }
}

impl ErrorProfile {
    pub fn none(seed: u64) -> Self {
        ErrorProfile { dup_rate: 0.0, inv_rate: 0.0, irr_rate: 0.0, del_rate: 0.0, seed, require_errors: false }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        for (name, r) in
            [("dup", self.dup_rate), ("inv", self.inv_rate), ("irr", self.irr_rate), ("del", self.del_rate)]
        {
            if !(0.0..=1.0).contains(&r) {
                return Err(ProfileError(format!("{name} rate {r} is outside [0, 1]")));
            }
        }
        if self.require_errors && [self.dup_rate, self.inv_rate, self.irr_rate, self.del_rate].iter().all(|r| *r == 0.0)
        {
            return Err(ProfileError("all rates are 0 but at least one injection is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub noisy: Plan,
    pub truth: ErrorAnnotation,
    pub record: InjectionRecord,
}

fn descriptor_for(step: &Step, clean_index: usize) -> MissingDescriptor {
    MissingDescriptor {
        verb: step.verb.clone(),
        object: step.object().unwrap_or_default().to_string(),
        note: format!("step {clean_index} `{step}` was dropped"),
    }
}

fn driver(verb: &str, object: &str) -> Step {
    Step::new(Actor::Driver, verb, vec![Arg::Str(object.to_string())])
}

/// Corrupts `clean` according to `profile` using stream 0.
pub fn inject_errors(clean: &Plan, profile: &ErrorProfile) -> Result<Injection, ProfileError> {
    inject_errors_with(clean, profile, 0)
}

/// Corrupts `clean` using the given generator stream. Deletions are drawn
/// first (only steps naming an object are eligible, and one action always
/// survives); then, after every surviving step, a duplicate, an inverse
/// toggle pair and an irrelevant pickup are each drawn in that order.
pub fn inject_errors_with(clean: &Plan, profile: &ErrorProfile, stream: u64) -> Result<Injection, ProfileError> {
    profile.validate()?;
    let mut rng = CorpusRng::new(profile.seed, stream);
    let steps: Vec<Step> = clean.steps().cloned().collect();
    let mut objects: Vec<&str> = Vec::new();
    for s in &steps {
        for a in &s.args {
            if let Some(o) = a.as_str() {
                if !objects.contains(&o) {
                    objects.push(o);
                }
            }
        }
    }
    let distractors: Vec<&str> = DISTRACTORS.iter().copied().filter(|d| !objects.contains(d)).collect();

    let mut keep = vec![true; steps.len()];
    for (i, s) in steps.iter().enumerate() {
        let survivors = keep.iter().filter(|k| **k).count();
        if s.object().is_some() && survivors > 1 && rng.chance(profile.del_rate) {
            keep[i] = false;
        }
    }

    let mut noisy: Vec<(Step, Option<InjectionKind>)> = Vec::new();
    let pair = |rng: &mut CorpusRng| {
        let object = if objects.is_empty() { FALLBACK_TOGGLE } else { objects[rng.below(objects.len())] };
        let (first, second) = if rng.chance(0.5) { ("ToggleOn", "ToggleOff") } else { ("ToggleOff", "ToggleOn") };
        [driver(first, object), driver(second, object)]
    };
    for (s, _) in steps.iter().zip(&keep).filter(|(_, k)| **k) {
        noisy.push((s.clone(), None));
        if rng.chance(profile.dup_rate) {
            noisy.push((s.clone(), Some(InjectionKind::Duplicate)));
        }
        if rng.chance(profile.inv_rate) {
            noisy.extend(pair(&mut rng).into_iter().map(|p| (p, Some(InjectionKind::InversePair))));
        }
        if !distractors.is_empty() && rng.chance(profile.irr_rate) {
            let d = distractors[rng.below(distractors.len())];
            noisy.push((driver("PickUp", d), Some(InjectionKind::IrrelevantPickup)));
        }
    }

    let nothing = keep.iter().all(|k| *k) && noisy.iter().all(|(_, k)| k.is_none());
    if profile.require_errors && nothing {
        let at = rng.below(noisy.len()) + 1;
        let forced: Vec<Step> = if profile.dup_rate > 0.0 {
            vec![noisy[at - 1].0.clone()]
        } else if profile.inv_rate > 0.0 {
            pair(&mut rng).to_vec()
        } else if profile.irr_rate > 0.0 && !distractors.is_empty() {
            vec![driver("PickUp", distractors[rng.below(distractors.len())])]
        } else {
            let eligible: Vec<usize> = (0..steps.len()).filter(|i| steps[*i].object().is_some()).collect();
            if eligible.is_empty() || steps.len() < 2 {
                return Err(ProfileError("plan has no step that can be injected or deleted".into()));
            }
            let victim = eligible[rng.below(eligible.len())];
            keep[victim] = false;
            noisy = steps.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| (s.clone(), None)).collect();
            Vec::new()
        };
        let kind = if profile.dup_rate > 0.0 {
            InjectionKind::Duplicate
        } else if profile.inv_rate > 0.0 {
            InjectionKind::InversePair
        } else {
            InjectionKind::IrrelevantPickup
        };
        for (k, s) in forced.into_iter().enumerate() {
            noisy.insert(at + k, (s, Some(kind)));
        }
    }

    let plan = Plan::from_steps(clean.goal.clone(), noisy.iter().map(|(s, _)| s.clone()));
    let injected: Vec<InjectedStep> =
        noisy.iter().enumerate().filter_map(|(i, (_, k))| k.map(|kind| InjectedStep { index: i + 1, kind })).collect();
    let deleted: Vec<DeletedStep> = keep
        .iter()
        .enumerate()
        .filter(|(_, k)| !**k)
        .map(|(i, _)| DeletedStep { clean_index: i + 1, action: steps[i].to_string() })
        .collect();
    let truth = ErrorAnnotation {
        remove_ids: injected.iter().map(|s| plan.get(s.index).expect("injected index in range").id).collect(),
        missing_steps: deleted.iter().map(|d| descriptor_for(&steps[d.clean_index - 1], d.clean_index)).collect(),
    };
    Ok(Injection {
        noisy: plan,
        truth,
        record: InjectionRecord {
            seed: profile.seed,
            stream,
            clean_actions: clean.canonical_lines(),
            injected,
            deleted,
        },
    })
}

/// Puts deleted steps back at their clean positions. `plan` must contain
/// exactly the surviving clean steps, in order.
pub fn restore_deleted(plan: &Plan, deleted: &[DeletedStep]) -> Result<Plan, ParseError> {
    let mut out = plan.clone();
    let mut sorted: Vec<&DeletedStep> = deleted.iter().collect();
    sorted.sort_by_key(|d| d.clean_index);
    for d in sorted {
        let step = parse_action(&d.action)?;
        out.insert((d.clean_index - 1).min(out.len()), step);
    }
    out.reindex();
    Ok(out)
}

/// Removes the truth's injected actions and restores its deleted steps.
pub fn reconstruct_clean(noisy: &Plan, truth: &ErrorAnnotation, record: &InjectionRecord) -> Result<Plan, ParseError> {
    let mut survivors = noisy.clone();
    survivors.retain(|a| !truth.remove_ids.contains(&a.id));
    survivors.reindex();
    restore_deleted(&survivors, &record.deleted)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GenSummary {
    pub episodes: usize,
    pub duplicate: usize,
    pub inverse_pair: usize,
    pub irrelevant_pickup: usize,
    pub deleted: usize,
}

impl GenSummary {
    fn add(&mut self, record: &InjectionRecord) {
        self.episodes += 1;
        for s in &record.injected {
            match s.kind {
                InjectionKind::Duplicate => self.duplicate += 1,
                InjectionKind::InversePair => self.inverse_pair += 1,
                InjectionKind::IrrelevantPickup => self.irrelevant_pickup += 1,
            }
        }
        self.deleted += record.deleted.len();
    }
}

/// Builds `n` synthetic episodes cycling through the bundled templates.
/// Episode `i` uses generator stream `i`.
pub fn generate_corpus(n: usize, profile: &ErrorProfile) -> Result<(Vec<EpisodeFile>, GenSummary), ProfileError> {
    if n == 0 {
        return Err(ProfileError("corpus size must be at least 1".into()));
    }
    profile.validate()?;
    let mut files = Vec::with_capacity(n);
    let mut summary = GenSummary::default();
    for i in 0..n {
        let t = &TEMPLATES[i % TEMPLATES.len()];
        let steps = t.actions.iter().map(|l| parse_action(l).expect("bundled templates parse"));
        let clean = Plan::from_steps(t.goal, steps);
        let inj = inject_errors_with(&clean, profile, i as u64)?;
        summary.add(&inj.record);
        files.push(EpisodeFile {
            episode_id: format!("syn-{:04}-{}", i + 1, t.task),
            context: t.context.to_string(),
            goal: t.goal.to_string(),
            actions: inj.noisy.canonical_lines(),
            annotations: Some(AnnotationFile {
                remove_indices: inj.record.injected.iter().map(|s| s.index).collect(),
                missing_steps: inj.truth.missing_steps.clone(),
            }),
            truth: Some(inj.record),
        });
    }
    Ok((files, summary))
}

/// A replay script for a judge that flags exactly the annotated truth.
/// Each round flags half of what is left (rounded up) so the loop runs
/// several rounds, then an empty round ends it. Missing-step flags quote
/// the deleted action.
pub fn oracle_script(episodes: &[Episode]) -> ScriptBook {
    let mut book = ScriptBook { label: "oracle".into(), ..ScriptBook::default() };
    book.schema = "script/1".into();
    for ep in episodes {
        let Some(ann) = &ep.annotations else { continue };
        let mut items: Vec<ScriptedCritique> = ann
            .remove_ids
            .iter()
            .map(|id| ScriptedCritique::Remove {
                target: ScriptTarget::Id(*id),
                reason: "annotated as erroneous".into(),
            })
            .collect();
        items.extend(ann.missing_steps.iter().map(|m| {
            let quoted = if m.object.is_empty() {
                format!("Driver.{}()", m.verb)
            } else {
                format!("Driver.{}('{}')", m.verb, m.object)
            };
            // the note keeps repeated steps apart so they are not merged
            ScriptedCritique::Missing {
                description: format!("Required step {quoted} is missing ({})", m.note),
                insert_after: None,
            }
        }));
        let mut rounds = Vec::new();
        while !items.is_empty() {
            let take = items.len().div_ceil(2);
            rounds.push(ScriptRound::Critiques { critiques: items.drain(..take).collect() });
        }
        rounds.push(ScriptRound::empty());
        book.episodes.insert(ep.episode_id.clone(), rounds);
    }
    book
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::parse_plan;
    use proptest::prelude::*;

    fn five() -> Plan {
        parse_plan(
            "Clean the bathroom",
            &[
                "Driver.PickUp('Soap')",
                "Driver.Move(5.0)",
                "Driver.Turn(90)",
                "Driver.PickUp('Sponge')",
                "Driver.Place('Sink')",
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_profile_is_identity() {
        let clean = five();
        let inj = inject_errors(&clean, &ErrorProfile::none(3)).unwrap();
        assert_eq!(inj.noisy, clean);
        assert_eq!(inj.truth, ErrorAnnotation::default());
    }

    #[test]
    fn same_seed_same_output() {
        let p = ErrorProfile { seed: 11, ..ErrorProfile::default() };
        assert_eq!(inject_errors(&five(), &p).unwrap(), inject_errors(&five(), &p).unwrap());
    }

    #[test]
    fn full_duplication_doubles_the_plan() {
        let p = ErrorProfile { dup_rate: 1.0, ..ErrorProfile::none(1) };
        let inj = inject_errors(&five(), &p).unwrap();
        assert_eq!(inj.noisy.len(), 10);
        let expected: BTreeSet<ActionId> = [2, 4, 6, 8, 10].into_iter().map(ActionId).collect();
        assert_eq!(inj.truth.remove_ids, expected);
    }

    #[test]
    fn require_errors_with_zero_rates_fails() {
        let p = ErrorProfile { require_errors: true, ..ErrorProfile::none(1) };
        assert!(inject_errors(&five(), &p).is_err());
        assert!(generate_corpus(10, &p).is_err());
        assert!(generate_corpus(0, &ErrorProfile::default()).is_err());
    }

    #[test]
    fn require_errors_forces_one() {
        for seed in 0..50 {
            let p = ErrorProfile { irr_rate: 0.001, require_errors: true, ..ErrorProfile::none(seed) };
            let inj = inject_errors(&five(), &p).unwrap();
            assert!(inj.truth.positives() >= 1, "seed {seed}");
            let p = ErrorProfile { del_rate: 0.001, require_errors: true, ..ErrorProfile::none(seed) };
            let inj = inject_errors(&five(), &p).unwrap();
            assert_eq!(inj.truth.missing_steps.len(), 1, "seed {seed}");
            assert_eq!(
                reconstruct_clean(&inj.noisy, &inj.truth, &inj.record).unwrap().canonical_lines(),
                five().canonical_lines()
            );
        }
    }

    #[test]
    fn irrelevant_pickups_avoid_plan_objects() {
        let p = ErrorProfile { irr_rate: 1.0, ..ErrorProfile::none(5) };
        let inj = inject_errors(&five(), &p).unwrap();
        for id in &inj.truth.remove_ids {
            let a = inj.noisy.get(inj.noisy.position_of(*id).unwrap()).unwrap();
            assert_eq!(a.step.verb, "PickUp");
            assert!(DISTRACTORS.contains(&a.step.object().unwrap()));
            assert!(!five().steps().any(|s| s.mentions(a.step.object().unwrap())));
        }
    }

    #[test]
    fn templates_parse_and_are_distinct() {
        let goals: BTreeSet<&str> = TEMPLATES.iter().map(|t| t.goal).collect();
        assert_eq!(goals.len(), 15);
        for t in &TEMPLATES {
            parse_plan(t.goal, t.actions).unwrap();
        }
    }

    #[test]
    fn generated_files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let (files, summary) = generate_corpus(20, &ErrorProfile { seed: 9, ..ErrorProfile::default() }).unwrap();
        assert_eq!(summary.episodes, 20);
        for f in &files {
            write_episode_file(dir.path(), f).unwrap();
        }
        let eps = load_episodes(dir.path()).unwrap();
        assert_eq!(eps.len(), 20);
        assert_eq!(load_episode_files(dir.path()).unwrap(), files);
        for (ep, f) in eps.iter().zip(&files) {
            let truth = f.truth.as_ref().unwrap();
            let ann = ep.annotations.as_ref().unwrap();
            let clean = reconstruct_clean(&ep.initial_plan, ann, truth).unwrap();
            assert_eq!(clean.canonical_lines(), truth.clean_actions);
        }
    }

    #[test]
    fn loader_reports_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_episodes(dir.path()), Err(CorpusError::EmptyCorpus(_))));
        let bad = EpisodeFile {
            episode_id: "bad".into(),
            context: String::new(),
            goal: "g".into(),
            actions: vec!["Driver.Stop()".into(), "Robot.Stop()".into()],
            annotations: Some(AnnotationFile { remove_indices: vec![0], missing_steps: vec![] }),
            truth: None,
        };
        write_episode_file(dir.path(), &bad).unwrap();
        std::fs::write(dir.path().join("broken.episode.json"), "{").unwrap();
        match load_episodes(dir.path()) {
            Err(CorpusError::Schema(errors)) => {
                let fields: Vec<&str> = errors.iter().map(|e| e.field.as_str()).collect();
                assert_eq!(fields, vec!["actions[2]", "annotations.remove_indices", "(document)"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = EpisodeFile {
            episode_id: "same".into(),
            context: String::new(),
            goal: "g".into(),
            actions: vec!["Driver.Stop()".into()],
            annotations: None,
            truth: None,
        };
        write_episode_file(dir.path(), &f).unwrap();
        std::fs::write(dir.path().join("other.episode.json"), serde_json::to_string(&f).unwrap()).unwrap();
        assert!(matches!(load_episodes(dir.path()), Err(CorpusError::Schema(e)) if e.len() == 1));
    }

    #[test]
    fn pinned_generator_values() {
        let mut a = CorpusRng::new(42, 0);
        let mut b = CorpusRng::new(42, 0);
        let xs: Vec<f64> = (0..4).map(|_| a.uniform()).collect();
        assert_eq!(xs, (0..4).map(|_| b.uniform()).collect::<Vec<_>>());
        assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
        assert_ne!(CorpusRng::new(42, 1).uniform(), xs[0]);
    }

    proptest! {
        #[test]
        fn reconstruction_invariant(seed in any::<u64>(), dup in 0.0f64..1.0, inv in 0.0f64..1.0, irr in 0.0f64..1.0, del in 0.0f64..1.0, t in 0usize..15) {
            let tpl = &TEMPLATES[t];
            let clean = parse_plan(tpl.goal, tpl.actions).unwrap();
            let p = ErrorProfile { dup_rate: dup, inv_rate: inv, irr_rate: irr, del_rate: del, seed, require_errors: false };
            let inj = inject_errors(&clean, &p).unwrap();
            prop_assert!(!inj.noisy.is_empty());
            prop_assert_eq!(inj.truth.remove_ids.len(), inj.record.injected.len());
            let back = reconstruct_clean(&inj.noisy, &inj.truth, &inj.record).unwrap();
            prop_assert_eq!(back.canonical_lines(), clean.canonical_lines());
        }
    }
}
