//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planverify::corpus::{generate_corpus, load_episodes, oracle_script, restore_deleted, EpisodeFile, ErrorProfile};
use planverify::engine::{verify_corpus, verify_episode, LoopConfig, TraceStatus, VerificationTrace};
use planverify::eval::{compute_metrics, f1_from_rates, match_flags, percent, summarize_run, Counts};
use planverify::judges::{
    rule_hits, rule_judge_evaluate, ChatClient, ChatRequest, LlmEndpoint, LlmJudge, ResponseCache, Rule, RuleJudge,
    ScriptBook, ScriptJudge, ScriptRound, ScriptTarget, ScriptedCritique, SharedJudge, Transport, TransportFailure,
    TransportReply, Usage,
};
use planverify::plan::{
    format_action, parse_action, parse_plan, ActionId, Actor, Arg, Episode, ErrorAnnotation, MissingDescriptor, Plan,
    Step,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn script(rounds: Vec<Vec<ScriptedCritique>>) -> Vec<ScriptRound> {
    rounds.into_iter().map(|critiques| ScriptRound::Critiques { critiques }).collect()
}

fn remove_id(id: u32) -> ScriptedCritique {
    ScriptedCritique::Remove { target: ScriptTarget::Id(ActionId(id)), reason: "scripted".into() }
}

fn episode(id: &str, plan: Plan, annotations: Option<ErrorAnnotation>) -> Episode {
    Episode { episode_id: id.into(), context: String::new(), initial_plan: plan, annotations }
}

fn book(rounds: BTreeMap<String, Vec<ScriptRound>>, label: &str) -> ScriptBook {
    ScriptBook { schema: "script/1".into(), episodes: rounds, label: label.into(), ..ScriptBook::default() }
}

fn synthetic(n: usize, seed: u64) -> (Vec<EpisodeFile>, Vec<Episode>) {
    let profile = ErrorProfile { seed, require_errors: true, ..ErrorProfile::default() };
    let (files, _) = generate_corpus(n, &profile).expect("profile is valid");
    let eps =
        files.iter().map(|f| f.to_episode(Path::new(&f.episode_id)).expect("generated files are valid")).collect();
    (files, eps)
}

// 1 ------------------------------------------------------------------------

fn loop_fidelity() -> Check {
    let lines = [
        "Driver.PickUp('Mug')",
        "Driver.PickUp('Mug')",
        "Driver.ToggleOff('Microwave')",
        "Driver.Open('Microwave')",
        "Driver.PickUp('RemoteControl')",
        "Driver.Place('Microwave')",
        "Driver.Close('Microwave')",
        "Driver.ToggleOn('Microwave')",
    ];
    let plan = parse_plan("Heat a mug of water", &lines).unwrap();
    let ep = episode("fidelity", plan.clone(), None);
    let cfg = LoopConfig::default();

    // k rounds of critiques, then an empty set
    let rounds = [
        vec![remove_id(2)],
        vec![remove_id(5), ScriptedCritique::Remove { target: ScriptTarget::Index(2), reason: "premature".into() }],
        vec![ScriptedCritique::Remove {
            target: ScriptTarget::Action("Driver.Close('Microwave')".into()),
            reason: "x".into(),
        }],
    ];
    // after round 1: Mug, ToggleOff, Open, Remote, Place, Close, ToggleOn
    // round 2 removes id 5 (Remote) and index 2 (ToggleOff)
    // round 3 removes Close
    let expected = [
        "Driver.PickUp('Mug')",
        "Driver.Open('Microwave')",
        "Driver.Place('Microwave')",
        "Driver.ToggleOn('Microwave')",
    ];
    for k in 0..=rounds.len() {
        let mut r = script(rounds[..k].to_vec());
        r.push(ScriptRound::empty());
        let judge = ScriptJudge::new(r);
        let trace = verify_episode(&ep, &judge, None, &cfg).map_err(|e| e.to_string())?;
        ensure(judge.calls() == k + 1, || format!("k={k}: {} judge calls", judge.calls()))?;
        ensure(trace.converged_at == Some(k + 1), || format!("k={k}: converged_at {:?}", trace.converged_at))?;
        if k == rounds.len() {
            ensure(trace.final_plan.canonical_lines() == expected, || {
                format!("final plan {:?}", trace.final_plan.canonical_lines())
            })?;
            let ids: Vec<u32> = trace.final_plan.ids().map(|i| i.0).collect();
            ensure(ids == [1, 4, 6, 8], || format!("surviving ids {ids:?}"))?;
        }
    }

    // a judge that never stops critiquing
    let judge = ScriptJudge::new(script(vec![vec![ScriptedCritique::Remove {
        target: ScriptTarget::Index(1),
        reason: "always".into(),
    }]]))
    .cycling();
    let trace = verify_episode(&ep, &judge, None, &cfg).map_err(|e| e.to_string())?;
    ensure(judge.calls() == 5 && trace.iterations.len() == 5, || format!("{} calls", judge.calls()))?;
    ensure(trace.status == TraceStatus::MaxRounds && trace.converged_at.is_none(), || format!("{:?}", trace.status))?;
    ensure(trace.final_plan.canonical_lines() == lines[5..], || {
        format!("final plan {:?}", trace.final_plan.canonical_lines())
    })?;
    ensure(&trace.final_plan == trace.iterations[4].plan_after(), || "final plan is not the last refined plan".into())?;
    Ok("k+1 calls for k=0..3, hand-computed final plan, 5 rounds when critiques persist".into())
}

// 2 ------------------------------------------------------------------------

const VERBS: [&str; 4] = ["Place", "Open", "Slice", "Rinse"];
const OBJECTS: [&str; 4] = ["Plate", "Fridge", "Bread", "Mug"];

/// Straight from the definitions: membership per id, first-fit matching
/// for missing steps, and f1 as 2tp / (2tp + fp + fn).
fn brute_force(
    flagged: &BTreeSet<u32>,
    truth: &BTreeSet<u32>,
    flags: &[(usize, usize)],
    descs: &[(usize, usize)],
) -> (Counts, [Ratio<u64>; 3]) {
    let mut c = Counts::default();
    for id in 1..=30 {
        match (flagged.contains(&id), truth.contains(&id)) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            _ => {}
        }
    }
    let mut used = vec![false; descs.len()];
    for f in flags {
        match (0..descs.len()).find(|&j| !used[j] && descs[j] == *f) {
            Some(j) => {
                used[j] = true;
                c.tp += 1;
            }
            None => c.fp += 1,
        }
    }
    c.fn_ += used.iter().filter(|u| !**u).count() as u64;
    let ratio = |n: u64, d: u64| if d == 0 { Ratio::from_integer(1) } else { Ratio::new(n, d) };
    let f1 =
        if c.tp + c.fp + c.fn_ == 0 { Ratio::from_integer(1) } else { Ratio::new(2 * c.tp, 2 * c.tp + c.fp + c.fn_) };
    (c, [ratio(c.tp, c.tp + c.fn_), ratio(c.tp, c.tp + c.fp), f1])
}

fn metrics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut pick = |n: u64| (rng.next_u64() % n) as usize;
    let lines: Vec<String> = (1..=30).map(|i| format!("Driver.Move({i})")).collect();
    let plan = parse_plan("g", &lines).unwrap();
    for case in 0..200 {
        let flagged: BTreeSet<u32> = (0..pick(12)).map(|_| pick(30) as u32 + 1).collect();
        let truth: BTreeSet<u32> = (0..pick(12)).map(|_| pick(30) as u32 + 1).collect();
        let flags: Vec<(usize, usize)> = (0..pick(4)).map(|_| (pick(4), pick(4))).collect();
        let descs: Vec<(usize, usize)> = (0..pick(4)).map(|_| (pick(4), pick(4))).collect();

        let ann = ErrorAnnotation {
            remove_ids: truth.iter().map(|i| ActionId(*i)).collect(),
            missing_steps: descs
                .iter()
                .map(|(v, o)| MissingDescriptor {
                    verb: VERBS[*v].into(),
                    object: OBJECTS[*o].into(),
                    note: String::new(),
                })
                .collect(),
        };
        let mut critiques: Vec<ScriptedCritique> = flagged.iter().map(|i| remove_id(*i)).collect();
        // flag texts are unique so the per-trace dedup keeps them all
        critiques.extend(flags.iter().enumerate().map(|(k, (v, o))| ScriptedCritique::Missing {
            description: format!("#{k}: Driver.{}('{}') is missing", VERBS[*v], OBJECTS[*o]),
            insert_after: None,
        }));
        let judge = ScriptJudge::new(vec![ScriptRound::Critiques { critiques }, ScriptRound::empty()]);
        let trace =
            verify_episode(&episode("m", plan.clone(), Some(ann.clone())), &judge, None, &LoopConfig::default())
                .map_err(|e| e.to_string())?;
        let got = match_flags(&trace, &ann).map_err(|e| e.to_string())?;
        let m = compute_metrics(&got.total);
        let (want, [r, p, f1]) = brute_force(&flagged, &truth, &flags, &descs);
        ensure(got.total == want, || format!("case {case}: counts {:?} vs oracle {:?}", got.total, want))?;
        ensure((m.recall, m.precision, m.f1) == (r, p, f1), || format!("case {case}: metrics differ from oracle"))?;
    }
    Ok("200 seeded instances, counts and exact rational scores equal the brute-force oracle".into())
}

// 3 ------------------------------------------------------------------------

fn f_score_arithmetic() -> Check {
    let rows: [((u64, u64), &str); 4] =
        [((88, 90), "89.0"), ((68, 100), "80.9"), ((90, 80), "84.7"), ((89, 99), "93.7")];
    let mut seen = Vec::new();
    let mut wrong = Vec::new();
    for ((r, p), want) in rows {
        let f1 = f1_from_rates(Ratio::new(p, 100), Ratio::new(r, 100));
        let got = percent(f1);
        seen.push(format!("{r}/{p} -> {got}"));
        if got != want {
            wrong.push(format!(
                "{r}/{p}: expected {want}, exact harmonic mean {}/{} rounds to {got}",
                f1.numer(),
                f1.denom()
            ));
        }
    }
    if wrong.is_empty() {
        Ok(seen.join(", "))
    } else {
        Err(wrong.join("; "))
    }
}

// 4 ------------------------------------------------------------------------

fn trace_converging_at(k: usize, plan: &Plan) -> VerificationTrace {
    let mut rounds: Vec<ScriptRound> = script(
        (1..k).map(|_| vec![ScriptedCritique::Remove { target: ScriptTarget::Index(1), reason: "x".into() }]).collect(),
    );
    rounds.push(ScriptRound::empty());
    verify_episode(
        &episode(&format!("c{k}"), plan.clone(), None),
        &ScriptJudge::new(rounds),
        None,
        &LoopConfig::default(),
    )
    .unwrap()
}

fn convergence_curve() -> Check {
    let plan = parse_plan("g", &(1..=8).map(|i| format!("Driver.Move({i})")).collect::<Vec<_>>()).unwrap();
    let mut traces = Vec::new();
    for (round, count) in [(1, 124), (2, 54), (3, 15), (4, 4), (5, 3)] {
        traces.extend((0..count).map(|_| trace_converging_at(round, &plan)));
    }
    let stats = planverify::eval::aggregate_convergence(&traces).map_err(|e| e.to_string())?;
    let want = [
        Ratio::new(62, 100),
        Ratio::new(89, 100),
        Ratio::new(965, 1000),
        Ratio::new(985, 1000),
        Ratio::from_integer(1),
    ];
    ensure(stats.cumulative == want, || format!("cumulative {:?}", stats.cumulative_percent()))?;
    ensure(stats.cumulative_percent()[..3] == ["62.0", "89.0", "96.5"], || {
        format!("{:?}", stats.cumulative_percent())
    })?;
    Ok(format!("cumulative {}", stats.cumulative_percent().join(" / ")))
}

// 5 ------------------------------------------------------------------------

fn perfect_oracle() -> Check {
    let (files, eps) = synthetic(100, 7);
    let judges = oracle_script(&eps);
    let traces = verify_corpus(&eps, &judges, None, &LoopConfig::default(), 4).map_err(|e| e.to_string())?;
    let report = summarize_run(&traces, &eps).map_err(|e| e.to_string())?;
    let m = report.metrics.as_ref().ok_or("no metrics section")?;
    ensure(m.recall.exact == "1/1" && m.precision.exact == "1/1", || {
        format!("recall {} precision {}", m.recall.percent, m.precision.percent)
    })?;
    let mut rounds = 0;
    for ((trace, file), ep) in traces.iter().zip(&files).zip(&eps) {
        let curve = trace.error_curve().ok_or("missing error counts")?;
        // the last entry repeats the value of the empty round
        let moving = &curve[..curve.len() - 1];
        ensure(moving.windows(2).all(|w| w[1] < w[0]), || {
            format!("{}: E not strictly decreasing: {curve:?}", trace.episode_id)
        })?;
        ensure(*curve.last().unwrap() == 0 && curve[0] == ep.annotations.as_ref().unwrap().positives(), || {
            format!("{}: curve {curve:?}", trace.episode_id)
        })?;
        let truth = file.truth.as_ref().unwrap();
        let restored = restore_deleted(&trace.final_plan, &truth.deleted).map_err(|e| e.to_string())?;
        ensure(restored.canonical_lines() == truth.clean_actions, || {
            format!("{}: refined plan differs from clean source", trace.episode_id)
        })?;
        rounds += trace.iterations.len();
    }
    Ok(format!("100 episodes, recall = precision = 100.0%, {rounds} rounds, every plan restored"))
}

// 6 ------------------------------------------------------------------------

fn rule_judge() -> Check {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rules");
    let fixtures = load_episodes(&dir).map_err(|e| e.to_string())?;
    let (_, synthetic_eps) = synthetic(60, 3);
    for ep in fixtures.iter().chain(&synthetic_eps) {
        let a = serde_json::to_string(&rule_judge_evaluate(&ep.initial_plan)).unwrap();
        let b = serde_json::to_string(&rule_judge_evaluate(&ep.initial_plan)).unwrap();
        ensure(a == b, || format!("{}: rule judge is not deterministic", ep.episode_id))?;
    }
    let provider = SharedJudge(Arc::new(RuleJudge));
    let run = || {
        verify_corpus(&synthetic_eps, &provider, None, &LoopConfig::default(), 3)
            .map(|t| serde_json::to_string(&t).unwrap())
    };
    ensure(run().map_err(|e| e.to_string())? == run().map_err(|e| e.to_string())?, || "corpus runs differ".into())?;

    let expected: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/oracles/rule_hits.expected.json"))
            .unwrap(),
    )
    .unwrap();
    let mut totals: BTreeMap<Rule, usize> = BTreeMap::new();
    for ep in &fixtures {
        let hits = rule_hits(&ep.initial_plan);
        for rule in Rule::ALL {
            let got: Vec<u64> = hits.iter().filter(|h| h.rule == rule).map(|h| h.index as u64).collect();
            let want: Vec<u64> = expected[&ep.episode_id][format!("{rule:?}")]
                .as_array()
                .ok_or_else(|| format!("oracle has no entry for {}", ep.episode_id))?
                .iter()
                .map(|v| v.as_u64().unwrap())
                .collect();
            ensure(got == want, || format!("{} {rule:?}: {got:?} vs oracle {want:?}", ep.episode_id))?;
            *totals.entry(rule).or_default() += got.len();
        }
        let flagged: Vec<u64> = rule_judge_evaluate(&ep.initial_plan).removes().map(|r| r.0 as u64).collect();
        let want: Vec<u64> =
            expected[&ep.episode_id]["flagged"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        ensure(flagged == want, || format!("{} flagged {flagged:?} vs oracle {want:?}", ep.episode_id))?;
    }
    for rule in Rule::ALL {
        let want = expected["totals"][format!("{rule:?}")].as_u64().unwrap() as usize;
        ensure(totals[&rule] == want, || format!("{rule:?} total {} vs oracle {want}", totals[&rule]))?;
    }
    Ok(format!(
        "deterministic over {} plans; per-rule hits {} match the oracle",
        fixtures.len() + synthetic_eps.len(),
        Rule::ALL.iter().map(|r| format!("{r:?}={}", totals[r])).collect::<Vec<_>>().join(" ")
    ))
}

// 7 ------------------------------------------------------------------------

fn random_step(rng: &mut ChaCha8Rng) -> Step {
    let mut n = |k: u64| rng.next_u64() % k;
    let actor = if n(4) == 0 { Actor::Commander } else { Actor::Driver };
    let alphabet: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
    let mut verb = String::from(alphabet[26 + n(26) as usize]);
    for _ in 0..n(10) {
        verb.push(alphabet[n(alphabet.len() as u64) as usize]);
    }
    let args = (0..n(4))
        .map(|_| {
            if n(2) == 0 {
                let printable: Vec<char> = (' '..='~').filter(|c| *c != '\'' && *c != '\\').collect();
                let text: String = (0..n(12)).map(|_| printable[n(printable.len() as u64) as usize]).collect();
                Arg::Str(text)
            } else {
                let whole = n(1000) as i64 - 500;
                let text = match n(3) {
                    0 => whole.to_string(),
                    1 => format!("{whole}.0"),
                    _ => format!("{whole}.{}", n(1000)),
                };
                Arg::Num(text.parse().unwrap())
            }
        })
        .collect();
    Step::new(actor, verb, args)
}

fn parser_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..1000 {
        let step = random_step(&mut rng);
        let text = format_action(&step);
        let back = parse_action(&text).map_err(|e| format!("#{i} `{text}`: {e}"))?;
        ensure(back == step, || format!("#{i}: `{text}` parsed to `{back}`"))?;
    }
    let listing = [
        "Driver.PickUp('Soap')      // Picked up early",
        "Driver.Move(5.0)           // Multiple intervening actions",
        "Driver.Turn(90)            ",
        "Driver.PickUp('Sponge')    ",
        "Driver.Place('Sink')       // Soap finally used here",
        "Driver.PickUp('Mug')        // REMOVE (AN: Incorrectly flagged)",
        "Driver.Place('Counter')",
        "Driver.PickUp('CoffeeFilter')",
        "Driver.Place('CoffeeMachine')",
        "Driver.PickUp('Plate')",
        "Driver.Place('DiningTable')",
        "Driver.PickUp('Plate')      // REMOVE (AN: Incorrectly flagged)",
        "Driver.Place('DiningTable') // Actually placing second plate",
    ];
    for line in listing {
        parse_action(line).map_err(|e| format!("`{line}`: {e}"))?;
    }
    let canon = |s: &str| parse_action(s).map(|a| format_action(&a)).unwrap_or_default();
    ensure(canon("Driver.PickUp('Soap')") == "Driver.PickUp('Soap')", || "Soap".into())?;
    ensure(canon("Driver.Move(5.0)") == "Driver.Move(5)", || canon("Driver.Move(5.0)"))?;
    ensure(canon("Driver.Turn(90)") == "Driver.Turn(90)", || "Turn".into())?;
    Ok(format!("1000 generated actions round-trip; {} listing lines parse", listing.len()))
}

// 8 ------------------------------------------------------------------------

/// Answers like a judge that objects to distractor objects and counts calls.
#[derive(Default)]
struct CountingTransport {
    calls: AtomicUsize,
}

impl Transport for CountingTransport {
    fn send(&self, req: &ChatRequest, _: &str) -> Result<TransportReply, TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let user = &req.messages.last().unwrap().content;
        let mut reply = String::new();
        for line in user.lines() {
            let Some((num, action)) = line.split_once(". ") else { continue };
            if num.parse::<usize>().is_err() || parse_action(action).is_err() {
                continue;
            }
            let note = if planverify::corpus::DISTRACTORS.iter().any(|d| action.contains(d)) {
                "#REMOVE: unrelated to the goal"
            } else {
                "Needed."
            };
            reply.push_str(&format!("ACTION: {num}. {action}\nANNOTATION: {note}\n"));
        }
        Ok(TransportReply { content: reply, usage: Usage { prompt_tokens: 10, completion_tokens: 5 } })
    }
}

fn cache_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.jsonl");
    let (_, eps) = synthetic(25, 11);
    let run = || -> Result<(usize, String, String, String), String> {
        let transport = Arc::new(CountingTransport::default());
        let cache = Arc::new(ResponseCache::open(&cache_path).map_err(|e| e.to_string())?);
        let client = ChatClient::new(transport.clone(), Some("test-key".into())).with_cache(cache);
        let judge =
            LlmJudge::new(Arc::new(client), LlmEndpoint::new("http://127.0.0.1:9/v1/chat/completions", "fake-judge"));
        let traces = verify_corpus(&eps, &SharedJudge(Arc::new(judge)), None, &LoopConfig::default(), 4)
            .map_err(|e| e.to_string())?;
        let report = summarize_run(&traces, &eps).map_err(|e| e.to_string())?;
        let traces_json: String = traces.iter().map(|t| serde_json::to_string_pretty(t).unwrap()).collect();
        Ok((transport.calls.load(Ordering::SeqCst), traces_json, report.to_json(), report.to_csv()))
    };
    let (cold_calls, t1, r1, c1) = run()?;
    let (warm_calls, t2, r2, c2) = run()?;
    ensure(cold_calls > 0, || "cold run made no calls".into())?;
    ensure(warm_calls == 0, || format!("warm run made {warm_calls} transport calls"))?;
    ensure(t1 == t2 && r1 == r2 && c1 == c2, || "warm run output differs".into())?;
    Ok(format!("cold run {cold_calls} calls, warm run 0 calls, traces and reports byte-identical"))
}

// 9 ------------------------------------------------------------------------

fn conservative_harness() -> Check {
    let (_, eps) = synthetic(60, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // judges that only ever flag true errors, in random subsets and orders
    let mut honest = BTreeMap::new();
    for ep in &eps {
        let ann = ep.annotations.as_ref().unwrap();
        let mut rounds = Vec::new();
        for _ in 0..(rng.next_u64() % 5) {
            let mut cs: Vec<ScriptedCritique> =
                ann.remove_ids.iter().filter(|_| rng.next_u64() % 3 == 0).map(|id| remove_id(id.0)).collect();
            cs.extend(ann.missing_steps.iter().filter(|_| rng.next_u64() % 2 == 0).map(|m| {
                ScriptedCritique::Missing {
                    description: format!("Driver.{}('{}') never happens", m.verb, m.object),
                    insert_after: None,
                }
            }));
            rounds.push(ScriptRound::Critiques { critiques: cs });
        }
        honest.insert(ep.episode_id.clone(), rounds);
    }
    // a removed id cannot be targeted again, so drop repeats up front
    for rounds in honest.values_mut() {
        let mut used = BTreeSet::new();
        for r in rounds.iter_mut() {
            if let ScriptRound::Critiques { critiques } = r {
                critiques.retain(|c| match c {
                    ScriptedCritique::Remove { target: ScriptTarget::Id(id), .. } => used.insert(*id),
                    _ => true,
                });
            }
        }
    }
    let traces =
        verify_corpus(&eps, &book(honest, "honest"), None, &LoopConfig::default(), 4).map_err(|e| e.to_string())?;
    let mut steps = 0;
    for t in &traces {
        ensure(!t.is_failed(), || format!("{}: {:?}", t.episode_id, t.status))?;
        let curve = t.error_curve().ok_or("no error counts")?;
        ensure(curve.windows(2).all(|w| w[1] <= w[0]), || format!("{}: E increased: {curve:?}", t.episode_id))?;
        steps += curve.len() - 1;
    }

    // a judge that also flags clean actions and invents missing steps
    let mut noisy = BTreeMap::new();
    let mut bad_flags = 0u64;
    let mut per_episode = BTreeMap::new();
    for ep in &eps {
        let ann = ep.annotations.as_ref().unwrap();
        let clean: Vec<ActionId> = ep.initial_plan.ids().filter(|id| !ann.remove_ids.contains(id)).collect();
        let wrong: Vec<ActionId> = clean.iter().copied().filter(|_| rng.next_u64() % 4 == 0).collect();
        let invented = (rng.next_u64() % 3) as usize;
        let mut cs: Vec<ScriptedCritique> = ann.remove_ids.iter().chain(&wrong).map(|id| remove_id(id.0)).collect();
        cs.extend(ann.missing_steps.iter().map(|m| ScriptedCritique::Missing {
            description: format!("Driver.{}('{}') never happens", m.verb, m.object),
            insert_after: None,
        }));
        cs.extend((0..invented).map(|k| ScriptedCritique::Missing {
            description: format!("Driver.Juggle('Orange{k}') is missing"),
            insert_after: None,
        }));
        bad_flags += (wrong.len() + invented) as u64;
        per_episode.insert(ep.episode_id.clone(), (wrong.len() + invented) as u64);
        noisy.insert(ep.episode_id.clone(), vec![ScriptRound::Critiques { critiques: cs }]);
    }
    let traces = verify_corpus(&eps, &book(noisy, "false-positive"), None, &LoopConfig::default(), 4)
        .map_err(|e| e.to_string())?;
    let report = summarize_run(&traces, &eps).map_err(|e| e.to_string())?;
    let m = report.metrics.as_ref().ok_or("no metrics section")?;
    ensure(m.counts.fp == bad_flags, || format!("report FP {} vs constructed {bad_flags}", m.counts.fp))?;
    for row in &report.per_episode {
        let fp = row.matches.as_ref().map(|x| x.total.fp).unwrap_or_default();
        ensure(fp == per_episode[&row.episode_id], || {
            format!("{}: FP {fp} vs {}", row.episode_id, per_episode[&row.episode_id])
        })?;
    }
    ensure(m.counts.fn_ == 0, || format!("FN {}", m.counts.fn_))?;
    Ok(format!("E non-increasing over {steps} rounds; {bad_flags} bad flags all counted as FP"))
}

fn run(n: usize, title: &str, limit: Option<Duration>, check: fn() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default())
    });
    let took = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if took > l => Err(format!("took {took:.2?}, limit {l:?}")),
        (o, _) => o,
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("[{tag}] criterion {n}: {title} ({took:.2?}) - {detail}");
    outcome.is_ok()
}

fn main() {
    let ms = Duration::from_millis;
    let results = [
        run(1, "loop fidelity", Some(ms(1000)), loop_fidelity),
        run(2, "metrics vs brute-force oracle", Some(ms(5000)), metrics_oracle),
        run(3, "F-score arithmetic to one decimal", None, f_score_arithmetic),
        run(4, "cumulative convergence curve", Some(ms(1000)), convergence_curve),
        run(5, "perfect-oracle round trip", Some(ms(10000)), perfect_oracle),
        run(6, "rule judge determinism and per-rule hits", None, rule_judge),
        run(7, "parser round trip", None, parser_round_trip),
        run(8, "warm cache determinism", None, cache_determinism),
        run(9, "conservative-property harness", None, conservative_harness),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
