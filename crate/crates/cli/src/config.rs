//! Run configuration for `verify`, merged as flags > environment > file > defaults.
//! Environment values reach us through clap, so a flag or variable always
//! arrives as `Some` and the file only fills the gaps.

use std::path::{Path, PathBuf};

use planverify::LoopConfig;
use serde::Deserialize;

use crate::{CliError, CliResult, VerifyArgs};

pub const CACHE_FILE: &str = "responses.jsonl";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub judge: Option<String>,
    pub inserter: Option<String>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub cache: Option<PathBuf>,
    #[serde(default, rename = "loop")]
    pub loop_: LoopSection,
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub max_rounds: Option<usize>,
    pub reprompt_on_malformed: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Fatal(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Rules,
    Llm,
    Script(PathBuf),
}

impl Backend {
    pub fn parse(s: &str, allow_rules: bool) -> CliResult<Backend> {
        match s {
            "rules" if allow_rules => Ok(Backend::Rules),
            "llm" => Ok(Backend::Llm),
            _ => match s.strip_prefix("script:") {
                Some(p) if !p.is_empty() => Ok(Backend::Script(PathBuf::from(p))),
                _ => {
                    let options = if allow_rules { "rules, llm or script:<file>" } else { "llm or script:<file>" };
                    Err(CliError::Usage(format!("unknown backend `{s}`; expected {options}")))
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub judge: Backend,
    pub inserter: Option<Backend>,
    pub loop_cfg: LoopConfig,
    pub cache: PathBuf,
    pub out: PathBuf,
    pub parallelism: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl RunConfig {
    pub fn uses_llm(&self) -> bool {
        self.judge == Backend::Llm || self.inserter == Some(Backend::Llm)
    }
}

pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn resolve(args: VerifyArgs) -> CliResult<RunConfig> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let corpus = args.corpus.or(file.corpus).ok_or_else(|| CliError::Usage("--corpus is required".into()))?;
    let out = args.out.or(file.out).ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let judge = Backend::parse(args.judge.or(file.judge).as_deref().unwrap_or("rules"), true)?;
    let inserter = args.inserter.or(file.inserter).map(|s| Backend::parse(&s, false)).transpose()?;

    let defaults = LoopConfig::default();
    let loop_cfg = LoopConfig {
        max_rounds: args.max_rounds.or(file.loop_.max_rounds).unwrap_or(defaults.max_rounds),
        removal_only: inserter.is_none(),
        reprompt_on_malformed: if args.no_reprompt {
            false
        } else {
            file.loop_.reprompt_on_malformed.unwrap_or(defaults.reprompt_on_malformed)
        },
    };
    loop_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let parallelism = args.parallelism.or(file.parallelism).unwrap_or_else(default_parallelism);
    if parallelism == 0 {
        return Err(CliError::Usage("--parallelism must be at least 1".into()));
    }
    let cache = args
        .cache
        .or(args.cache_dir.map(|d| d.join(CACHE_FILE)))
        .or(file.cache)
        .unwrap_or_else(|| out.join(CACHE_FILE));

    Ok(RunConfig {
        corpus,
        judge,
        inserter,
        loop_cfg,
        cache,
        out,
        parallelism,
        endpoint: args.endpoint.or(file.llm.endpoint),
        model: args.model.or(file.llm.model),
    })
}
