//! Chat-completion client with a content-addressed response cache and
//! bounded retries.
//!
//! The cache is an append-only JSON-lines file. Each record is
//! `{key, model, request_hash, content, usage, timestamp}` where
//! `request_hash = sha256(canonical JSON of {messages, temperature})` and
//! `key = sha256(model + "\n" + request_hash)`. A record whose key does not
//! recompute is reported as corrupt.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub endpoint: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 2048;

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            endpoint: endpoint.into(),
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn request_hash(&self) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            messages: &'a [ChatMessage],
            temperature: f64,
        }
        let canonical = serde_json::to_vec(&Keyed { messages: &self.messages, temperature: self.temperature })
            .expect("messages serialize");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn cache_key(&self) -> String {
        cache_key(&self.model, &self.request_hash())
    }
}

fn cache_key(model: &str, request_hash: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.as_bytes());
    hasher.update(b"\n");
    hasher.update(request_hash.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Usage,
    pub latency: Duration,
    pub cached: bool,
    pub retries: u32,
}

/// What a transport returns on success.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportReply {
    pub content: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportFailure {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("request failed: {0}")]
    Fatal(String),
}

/// One attempt at a chat completion. Implementations do no retrying.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest, api_key: &str) -> Result<TransportReply, TransportFailure>;
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("chat request failed after {attempts} attempt(s): {last}")]
    Transport { attempts: u32, last: TransportFailure },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("cache record {line} in {path} is corrupt: {reason}")]
    CacheCorrupt { path: PathBuf, line: usize, reason: String },
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): `base * 2^(retry-1)`,
    /// capped, or the server's hint when rate limited.
    pub fn delay(&self, retry: u32, hint: Option<Duration>) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << (retry - 1).min(16));
        hint.unwrap_or(exp).min(self.max_delay)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model: String,
    pub request_hash: String,
    pub content: String,
    pub usage: Usage,
    pub timestamp: u64,
}

/// Content-addressed response store. Reads are concurrent; appends are
/// serialized through one file handle.
#[derive(Debug)]
pub struct ResponseCache {
    entries: RwLock<HashMap<String, CacheRecord>>,
    file: Option<(PathBuf, Mutex<File>)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache { entries: RwLock::new(HashMap::new()), file: None }
    }

    /// Opens (creating if needed) a cache file and verifies every record.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ChatError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |reason: String| ChatError::CacheCorrupt { path: path.clone(), line: i + 1, reason };
                let record: CacheRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if cache_key(&record.model, &record.request_hash) != record.key {
                    return Err(corrupt("key does not match model and request hash".into()));
                }
                entries.entry(record.key.clone()).or_insert(record);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ResponseCache { entries: RwLock::new(entries), file: Some((path, Mutex::new(file))) })
    }

    pub fn get(&self, key: &str) -> Option<CacheRecord> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: CacheRecord) -> Result<(), ChatError> {
        if let Some((_, file)) = &self.file {
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            let mut file = file.lock().expect("cache file lock");
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.entries.write().expect("cache lock").entry(record.key.clone()).or_insert(record);
        Ok(())
    }
}

/// Cached, retrying chat-completion client.
pub struct ChatClient {
    transport: Arc<dyn Transport>,
    api_key: Option<String>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    sleeper: Sleeper,
}

impl ChatClient {
    pub fn new(transport: Arc<dyn Transport>, api_key: Option<String>) -> Self {
        ChatClient {
            transport,
            api_key: api_key.filter(|k| !k.is_empty()),
            cache: None,
            retry: RetryPolicy::default(),
            sleeper: Arc::new(std::thread::sleep),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn chat_complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let started = Instant::now();
        let request_hash = request.request_hash();
        let key = cache_key(&request.model, &request_hash);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(ChatResponse {
                content: hit.content,
                usage: hit.usage,
                latency: started.elapsed(),
                cached: true,
                retries: 0,
            });
        }
        let api_key = self.api_key.as_deref().ok_or_else(|| ChatError::Auth("no API key configured".into()))?;

        let mut retries = 0;
        let reply = loop {
            match self.transport.send(request, api_key) {
                Ok(reply) => break reply,
                Err(TransportFailure::Auth(msg)) => return Err(ChatError::Auth(msg)),
                Err(TransportFailure::Fatal(msg)) => {
                    return Err(ChatError::Transport { attempts: retries + 1, last: TransportFailure::Fatal(msg) })
                }
                Err(failure) if retries >= self.retry.max_retries => {
                    return Err(ChatError::Transport { attempts: retries + 1, last: failure })
                }
                Err(failure) => {
                    retries += 1;
                    let hint = match &failure {
                        TransportFailure::RateLimited { retry_after } => *retry_after,
                        _ => None,
                    };
                    let delay = self.retry.delay(retries, hint);
                    tracing::warn!(%failure, retry = retries, ?delay, "retrying chat request");
                    (self.sleeper)(delay);
                }
            }
        };

        if let Some(cache) = &self.cache {
            let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            cache.insert(CacheRecord {
                key,
                model: request.model.clone(),
                request_hash,
                content: reply.content.clone(),
                usage: reply.usage,
                timestamp,
            })?;
        }
        Ok(ChatResponse {
            content: reply.content,
            usage: reply.usage,
            latency: started.elapsed(),
            cached: false,
            retries,
        })
    }
}
