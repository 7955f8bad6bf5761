//! Streaming client for OpenAI-compatible chat-completions endpoints.

use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{line_channel, ChatMessage, ChatProvider, GatewayError, LineSink, LineSplitter, LineStream};

pub const DEFAULT_KEY_ENV: &str = "SCENECMD_API_KEY";
const ENDPOINT_ENV: &str = "SCENECMD_ENDPOINT";
const MODEL_ENV: &str = "SCENECMD_MODEL";

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.to_string()
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Base URL (`…/v1`) or the full `…/chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the key. The key itself is
    /// never read from or written to a file.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
    /// Connect and inter-chunk idle timeout, seconds.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            temperature: 0.0,
            top_p: 0.0,
            seed: None,
            timeout_s: default_timeout(),
        }
    }

    /// Reads a JSON config file, then applies environment overrides.
    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ProviderConfig =
            serde_json::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var(ENDPOINT_ENV) {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var(MODEL_ENV) {
            self.model = v;
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(GatewayError::Config("timeout must be positive".into()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(GatewayError::Config("endpoint is empty".into()));
        }
        if self.model.trim().is_empty() {
            return Err(GatewayError::Config("model is empty".into()));
        }
        Ok(())
    }

    pub fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }
}

#[derive(Debug, Clone)]
pub struct OpenAiProvider {
    cfg: ProviderConfig,
    client: reqwest::Client,
}

impl OpenAiProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let client = reqwest::Client::builder()
            .connect_timeout(cfg.timeout())
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self { cfg, client })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    fn body(&self, messages: &[ChatMessage]) -> serde_json::Value {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": messages,
            "stream": true,
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
        });
        if let Some(seed) = self.cfg.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

/// What one SSE `data:` payload contributes.
#[derive(Debug, PartialEq)]
enum SseData {
    Text(String),
    Done,
    Nothing,
}

fn parse_sse_data(payload: &str) -> Result<SseData, GatewayError> {
    let payload = payload.trim();
    if payload == "[DONE]" {
        return Ok(SseData::Done);
    }
    let v: serde_json::Value =
        serde_json::from_str(payload).map_err(|e| GatewayError::Transport(format!("bad event payload: {e}")))?;
    if let Some(err) = v.get("error") {
        return Err(GatewayError::Provider {
            status: 200,
            body: err.to_string(),
        });
    }
    let text = v
        .pointer("/choices/0/delta/content")
        .and_then(|c| c.as_str())
        .unwrap_or_default();
    Ok(if text.is_empty() {
        SseData::Nothing
    } else {
        SseData::Text(text.to_string())
    })
}

async fn pump(response: reqwest::Response, sink: LineSink, idle: Duration) {
    let mut body = response.bytes_stream();
    let mut raw: Vec<u8> = Vec::new();
    let mut splitter = LineSplitter::default();
    loop {
        let chunk = match tokio::time::timeout(idle, body.next()).await {
            Err(_) => return sink.fail(GatewayError::Timeout).await,
            Ok(None) => break,
            // A cut-off line may still parse (`;` is optional), so it is dropped.
            Ok(Some(Err(e))) => return sink.fail(GatewayError::Transport(e.to_string())).await,
            Ok(Some(Ok(c))) => c,
        };
        raw.extend_from_slice(&chunk);
        while let Some(i) = raw.iter().position(|&b| b == b'\n') {
            let event_line: Vec<u8> = raw.drain(..=i).collect();
            let event_line = String::from_utf8_lossy(&event_line);
            let Some(payload) = event_line.trim_end().strip_prefix("data:") else {
                continue;
            };
            match parse_sse_data(payload) {
                Ok(SseData::Text(t)) => {
                    for line in splitter.push(&t) {
                        if !sink.line(line).await {
                            return;
                        }
                    }
                }
                Ok(SseData::Nothing) => {}
                Ok(SseData::Done) => {
                    if let Some(l) = splitter.finish() {
                        sink.line(l).await;
                    }
                    return;
                }
                Err(e) => return sink.fail(e).await,
            }
        }
    }
    // Body ended without [DONE]: deliver what we have, then report it.
    if let Some(l) = splitter.finish() {
        sink.line(l).await;
    }
    sink.fail(GatewayError::Transport("stream ended before completion".into()))
        .await;
}

#[async_trait]
impl ChatProvider for OpenAiProvider {
    async fn stream_chat(&self, messages: Vec<ChatMessage>) -> Result<LineStream, GatewayError> {
        let (sink, stream) = line_channel(64);
        let mut req = self
            .client
            .post(self.cfg.url())
            .header("content-type", "application/json")
            .header("accept", "text/event-stream")
            .body(self.body(&messages).to_string());
        if let Some(key) = self.cfg.api_key() {
            req = req.bearer_auth(key);
        }
        let response = match tokio::time::timeout(self.cfg.timeout(), req.send()).await {
            Err(_) => return Err(GatewayError::Timeout),
            Ok(Err(e)) if e.is_timeout() => return Err(GatewayError::Timeout),
            Ok(Err(e)) => return Err(GatewayError::Transport(e.to_string())),
            Ok(Ok(r)) => r,
        };
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(GatewayError::Provider {
                status: status.as_u16(),
                body,
            });
        }
        tokio::spawn(pump(response, sink, self.cfg.timeout()));
        Ok(stream)
    }
}
