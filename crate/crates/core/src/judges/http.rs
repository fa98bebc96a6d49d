//! OpenAI-style `chat/completions` transport over HTTP.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::chat::{ChatRequest, Transport, TransportFailure, TransportReply, Usage};

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        HttpTransport { agent: ureq::Agent::new_with_config(config) }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: MessageBody,
}

#[derive(Deserialize)]
struct MessageBody {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest, api_key: &str) -> Result<TransportReply, TransportFailure> {
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut response = self
            .agent
            .post(&request.endpoint)
            .header("Authorization", &format!("Bearer {api_key}"))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => {
                    TransportFailure::Transient(e.to_string())
                }
                other => TransportFailure::Fatal(other.to_string()),
            })?;

        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response.body_mut().read_to_string().map_err(|e| TransportFailure::Transient(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(TransportFailure::Auth(format!("HTTP {status}: {text}"))),
            408 | 409 | 425 | 500..=599 => return Err(TransportFailure::Transient(format!("HTTP {status}"))),
            429 => return Err(TransportFailure::RateLimited { retry_after }),
            _ => return Err(TransportFailure::Fatal(format!("HTTP {status}: {text}"))),
        }
        let parsed: CompletionBody =
            serde_json::from_str(&text).map_err(|e| TransportFailure::Fatal(format!("bad response body: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportFailure::Fatal("response has no message content".into()))?;
        let usage = parsed
            .usage
            .map(|u| Usage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
            .unwrap_or_default();
        Ok(TransportReply { content, usage })
    }
}
