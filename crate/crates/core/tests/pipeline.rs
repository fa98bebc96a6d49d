//! Corpus files to traces on disk to a report, through the public API only.

use planverify::corpus::{
    generate_corpus, load_episodes, oracle_script, reconstruct_clean, write_episode_file, ErrorProfile,
};
use planverify::engine::{read_traces, write_trace};
use planverify::judges::{RuleJudge, SharedJudge};
use planverify::{summarize_run, verify_corpus, LoopConfig, Plan};
use std::sync::Arc;

#[test]
fn generated_corpus_survives_the_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let profile = ErrorProfile { seed: 21, require_errors: true, ..ErrorProfile::default() };
    let (files, summary) = generate_corpus(25, &profile).unwrap();
    assert_eq!(summary.episodes, 25);
    for f in &files {
        write_episode_file(dir.path(), f).unwrap();
    }
    let episodes = load_episodes(dir.path()).unwrap();
    assert_eq!(episodes.len(), 25);
    for (ep, f) in episodes.iter().zip(&files) {
        assert_eq!(ep.episode_id, f.episode_id);
        let truth = f.truth.as_ref().unwrap();
        let clean = reconstruct_clean(&ep.initial_plan, ep.annotations.as_ref().unwrap(), truth).unwrap();
        assert_eq!(clean.canonical_lines(), truth.clean_actions);
    }
}

#[test]
fn oracle_and_rules_runs_produce_consistent_reports() {
    let corpus = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let profile = ErrorProfile { seed: 5, require_errors: true, ..ErrorProfile::default() };
    for f in generate_corpus(30, &profile).unwrap().0 {
        write_episode_file(corpus.path(), &f).unwrap();
    }
    let episodes = load_episodes(corpus.path()).unwrap();
    let cfg = LoopConfig::default();

    let oracle = verify_corpus(&episodes, &oracle_script(&episodes), None, &cfg, 4).unwrap();
    for t in &oracle {
        write_trace(out.path(), t).unwrap();
    }
    let reread = read_traces(out.path()).unwrap();
    assert_eq!(reread, oracle);
    let report = summarize_run(&reread, &episodes).unwrap();
    let m = report.metrics.as_ref().unwrap();
    assert_eq!((m.recall.percent.as_str(), m.precision.percent.as_str()), ("100.0", "100.0"));
    assert_eq!(report.convergence.not_converged, 0);
    let curve = report.convergence.mean_error_by_round.as_ref().unwrap();
    assert_eq!(*curve.last().unwrap(), 0.0);

    // removal-only: refined plans only ever lose actions
    let rules = verify_corpus(&episodes, &SharedJudge(Arc::new(RuleJudge)), None, &cfg, 2).unwrap();
    for (t, ep) in rules.iter().zip(&episodes) {
        assert!(t.final_plan.len() <= ep.initial_plan.len());
        let kept: Vec<_> = t.final_plan.ids().collect();
        assert!(kept.iter().all(|id| ep.initial_plan.contains(*id)));
        assert!(Plan::from_text(&t.final_plan.to_text()).unwrap().same_steps(&t.final_plan));
    }
    let rules_report = summarize_run(&rules, &episodes).unwrap();
    let rm = rules_report.metrics.unwrap();
    assert_eq!(rm.counts.tp + rm.counts.fn_, m.counts.tp + m.counts.fn_, "same ground truth size");
}
