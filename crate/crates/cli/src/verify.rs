use std::path::Path;
use std::sync::Arc;

use planverify::corpus::load_episodes;
use planverify::engine::write_trace;
use planverify::judges::{
    ChatClient, HttpTransport, JudgeProvider, LlmEndpoint, LlmInserter, LlmJudge, ResponseCache, RuleJudge, ScriptBook,
    SharedJudge,
};
use planverify::planner::ScriptInserter;
use planverify::{verify_corpus, Inserter, Plan, TraceStatus};

use crate::config::{resolve, Backend, RunConfig};
use crate::{CliError, CliResult, VerifyArgs, EXIT_OK, EXIT_PARTIAL};

pub const API_KEY_VAR: &str = "PV_LLM_API_KEY";
pub const PLAN_SCHEMA: &str = "plan/1";

/// Credentials and endpoint for the model backends, checked before anything
/// is written.
struct LlmSettings {
    api_key: String,
    endpoint: LlmEndpoint,
}

fn llm_settings(cfg: &RunConfig) -> CliResult<LlmSettings> {
    let api_key = std::env::var(API_KEY_VAR).unwrap_or_default();
    if api_key.trim().is_empty() {
        return Err(CliError::Fatal(format!(
            "the llm backend needs an API key: export {API_KEY_VAR}=<key> (or use --judge rules / script:<file>)"
        )));
    }
    let endpoint = cfg.endpoint.clone().ok_or_else(|| {
        CliError::Fatal("the llm backend needs an endpoint: pass --endpoint or set PV_LLM_ENDPOINT".into())
    })?;
    let model = cfg
        .model
        .clone()
        .ok_or_else(|| CliError::Fatal("the llm backend needs a model: pass --model or set PV_LLM_MODEL".into()))?;
    Ok(LlmSettings { api_key, endpoint: LlmEndpoint::new(endpoint, model) })
}

fn load_script(path: &Path) -> CliResult<ScriptBook> {
    ScriptBook::load(path).map_err(|e| CliError::Fatal(format!("cannot load judge script {}: {e}", path.display())))
}

fn load_script_inserter(path: &Path) -> CliResult<ScriptInserter> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Fatal(format!("cannot read inserter script {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Fatal(format!("inserter script {} is invalid: {e}", path.display())))
}

/// Refined plan file: the plan text with a schema comment after the goal line.
pub fn refined_plan_text(plan: &Plan) -> String {
    let text = plan.to_text();
    let (goal, rest) = text.split_once('\n').unwrap_or((&text, ""));
    format!("{goal}\n# schema: {PLAN_SCHEMA}\n{rest}")
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Fatal(format!("cannot write {}: {e}", path.display()))
}

pub fn run(args: VerifyArgs) -> CliResult<u8> {
    let cfg = resolve(args)?;
    let llm = if cfg.uses_llm() { Some(llm_settings(&cfg)?) } else { None };

    let episodes = load_episodes(&cfg.corpus).map_err(|e| CliError::Fatal(e.to_string()))?;
    let judge_book = match &cfg.judge {
        Backend::Script(p) => Some(load_script(p)?),
        _ => None,
    };
    let script_inserter = match &cfg.inserter {
        Some(Backend::Script(p)) => Some(load_script_inserter(p)?),
        _ => None,
    };

    // Nothing has been written up to here.
    std::fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    let client = match &llm {
        Some(s) => {
            if let Some(dir) = cfg.cache.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            let cache = ResponseCache::open(&cfg.cache).map_err(|e| CliError::Fatal(e.to_string()))?;
            tracing::info!(cache = %cfg.cache.display(), cached = cache.len(), "response cache ready");
            Some(Arc::new(
                ChatClient::new(Arc::new(HttpTransport::default()), Some(s.api_key.clone()))
                    .with_cache(Arc::new(cache)),
            ))
        }
        None => None,
    };

    let provider: Box<dyn JudgeProvider> = match (&cfg.judge, judge_book) {
        (_, Some(book)) => Box::new(book),
        (Backend::Rules, None) => Box::new(SharedJudge(Arc::new(RuleJudge))),
        (Backend::Llm, None) => {
            let (client, s) = (client.clone().expect("client built for llm"), llm.as_ref().expect("llm settings"));
            Box::new(SharedJudge(Arc::new(
                LlmJudge::new(client, s.endpoint.clone()).with_reprompt(cfg.loop_cfg.reprompt_on_malformed),
            )))
        }
        (Backend::Script(_), None) => unreachable!("script judges are loaded above"),
    };
    let inserter: Option<Box<dyn Inserter>> = match (&cfg.inserter, script_inserter) {
        (_, Some(s)) => Some(Box::new(s)),
        (Some(Backend::Llm), None) => {
            Some(Box::new(LlmInserter::new(client.expect("client built for llm"), llm.expect("llm settings").endpoint)))
        }
        _ => None,
    };

    tracing::info!(
        episodes = episodes.len(),
        judge = %provider.identity(),
        max_rounds = cfg.loop_cfg.max_rounds,
        parallelism = cfg.parallelism,
        "verifying"
    );
    let traces = verify_corpus(&episodes, provider.as_ref(), inserter.as_deref(), &cfg.loop_cfg, cfg.parallelism)
        .map_err(|e| CliError::Fatal(e.to_string()))?;

    let trace_dir = cfg.out.join("traces");
    let plan_dir = cfg.out.join("refined");
    for dir in [&trace_dir, &plan_dir] {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut failed = 0;
    for trace in &traces {
        write_trace(&trace_dir, trace).map_err(|e| CliError::Fatal(e.to_string()))?;
        if trace.is_failed() {
            failed += 1;
            continue;
        }
        let path = plan_dir.join(format!("{}.plan", trace.episode_id));
        std::fs::write(&path, refined_plan_text(&trace.final_plan)).map_err(|e| io_err(&path, e))?;
        let status = match &trace.status {
            TraceStatus::Converged => "converged",
            TraceStatus::MaxRounds => "max-rounds",
            TraceStatus::Oscillating => "oscillating",
            TraceStatus::Failed { .. } => "failed",
        };
        tracing::info!(
            episode = %trace.episode_id,
            status,
            rounds = trace.iterations.len(),
            len_before = trace.initial_plan.len(),
            len_after = trace.final_plan.len(),
            "done"
        );
    }
    println!(
        "verified {} episode(s): {} ok, {} failed; traces in {}",
        traces.len(),
        traces.len() - failed,
        failed,
        trace_dir.display()
    );
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}
