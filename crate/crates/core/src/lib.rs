//! Iterative plan verification: a judge critiques an action sequence, a
//! planner applies the critiques, and the loop repeats until the judge has
//! nothing left to say.
//!
//! * [`plan`]: the action DSL, plans and annotations.
//! * [`critique`]: critiques and the judge reply grammar.
//! * [`judges`]: LLM, rule-based and scripted judges.
//! * [`planner`]: applying critiques to a plan.
//! * [`engine`]: the loop, traces and corpus runs.
//! * [`eval`]: precision/recall/F1 and convergence statistics.
//! * [`corpus`]: episode files and synthetic corpora.

pub mod corpus;
pub mod critique;
pub mod engine;
pub mod eval;
pub mod judges;
pub mod plan;
pub mod planner;

pub use critique::{normalize_critiques, parse_judge_output, Critique, CritiqueSet};
pub use engine::{verify_corpus, verify_episode, LoopConfig, TraceStatus, VerificationTrace};
pub use eval::{compute_metrics, match_flags, summarize_run, Metrics, RunReport};
pub use plan::{format_action, parse_action, parse_plan, reindex, Action, ActionId, Episode, ErrorAnnotation, Plan};
pub use planner::{apply_critiques, Inserter, Revision};
