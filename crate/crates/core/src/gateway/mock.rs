//! Scripted provider for tests, demos and offline sessions.

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{line_channel, ChatMessage, ChatProvider, GatewayError, LineSplitter, LineStream, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Substring looked for in the latest user message; empty matches all.
    #[serde(rename = "match")]
    pub pattern: String,
    #[serde(default)]
    pub response: String,
    /// Alternative to `response`: a file, relative to the script.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_file: Option<String>,
    #[serde(default)]
    pub line_delay_ms: u64,
    /// Simulates a dropped connection after this many lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_after_lines: Option<usize>,
}

impl ScriptEntry {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>, line_delay_ms: u64) -> Self {
        Self {
            pattern: pattern.into(),
            response: response.into(),
            response_file: None,
            line_delay_ms,
            fail_after_lines: None,
        }
    }
}

/// Replays canned responses; the first entry whose pattern occurs in the
/// latest user message wins.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    script: Vec<ScriptEntry>,
    requests: Arc<Mutex<Vec<Vec<ChatMessage>>>>,
}

impl MockProvider {
    pub fn new(script: Vec<ScriptEntry>) -> Self {
        Self {
            script,
            requests: Arc::default(),
        }
    }

    /// Loads a JSON array of entries, inlining any `response_file`s.
    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut script: Vec<ScriptEntry> =
            serde_json::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for entry in &mut script {
            if let Some(file) = entry.response_file.take() {
                let p = base.join(&file);
                entry.response =
                    std::fs::read_to_string(&p).map_err(|e| GatewayError::Config(format!("{}: {e}", p.display())))?;
            }
        }
        Ok(Self::new(script))
    }

    pub fn script(&self) -> &[ScriptEntry] {
        &self.script
    }

    /// Every message list this provider has been sent.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().expect("mock lock").clone()
    }
}

#[async_trait]
impl ChatProvider for MockProvider {
    async fn stream_chat(&self, messages: Vec<ChatMessage>) -> Result<LineStream, GatewayError> {
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.clone())
            .unwrap_or_default();
        self.requests.lock().expect("mock lock").push(messages);
        let entry = self
            .script
            .iter()
            .find(|e| last_user.contains(&e.pattern))
            .cloned()
            .ok_or(GatewayError::NoScriptMatch)?;

        let (sink, stream) = line_channel(64);
        tokio::spawn(async move {
            let mut splitter = LineSplitter::default();
            let mut lines = splitter.push(&entry.response);
            lines.extend(splitter.finish());
            for (i, line) in lines.into_iter().enumerate() {
                if entry.fail_after_lines == Some(i) {
                    sink.fail(GatewayError::Transport("connection reset by peer".into()))
                        .await;
                    return;
                }
                if entry.line_delay_ms > 0 {
                    tokio::time::sleep(Duration::from_millis(entry.line_delay_ms)).await;
                }
                if !sink.line(line).await {
                    return;
                }
            }
        });
        Ok(stream)
    }
}
