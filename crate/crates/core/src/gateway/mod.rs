//! Chat-model plumbing: prompt rendering, the sliding context window and
//! line-streaming providers.

mod context;
mod mock;
mod openai;
mod prompt;

use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

pub use context::{ContextWindow, HISTORY_CAPACITY};
pub use mock::{MockProvider, ScriptEntry};
pub use openai::{OpenAiProvider, ProviderConfig};
pub use prompt::{
    one_shot_pair, render_system_prompt, system_template, ONE_SHOT_ASSISTANT, ONE_SHOT_USER, SYSTEM_TASK1, SYSTEM_TASK2,
};

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
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("no scripted response matches the request")]
    NoScriptMatch,
    #[error("template placeholder {0} must appear exactly once")]
    MissingPlaceholder(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// A complete response line, stamped with its arrival offset from the
/// moment the request was sent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamLine {
    pub text: String,
    pub offset_ms: u64,
}

#[derive(Debug)]
enum LineEvent {
    Line(StreamLine),
    Error(GatewayError),
}

/// Receiving half of a response: complete lines in arrival order, then
/// either a clean end (`None`) or one terminal error.
#[derive(Debug)]
pub struct LineStream {
    rx: mpsc::Receiver<LineEvent>,
    finished: bool,
}

impl LineStream {
    pub async fn next(&mut self) -> Option<Result<StreamLine, GatewayError>> {
        if self.finished {
            return None;
        }
        match self.rx.recv().await {
            Some(LineEvent::Line(l)) => Some(Ok(l)),
            Some(LineEvent::Error(e)) => {
                self.finished = true;
                Some(Err(e))
            }
            None => {
                self.finished = true;
                None
            }
        }
    }

    /// Drains the stream, returning the lines and the terminal error if any.
    pub async fn collect(mut self) -> (Vec<StreamLine>, Option<GatewayError>) {
        let mut lines = Vec::new();
        while let Some(item) = self.next().await {
            match item {
                Ok(l) => lines.push(l),
                Err(e) => return (lines, Some(e)),
            }
        }
        (lines, None)
    }

    /// A stream over already-known lines; used for replay.
    pub fn from_lines(lines: Vec<StreamLine>, error: Option<GatewayError>) -> LineStream {
        let (tx, stream) = line_channel(lines.len() + 1);
        for l in lines {
            tx.tx.try_send(LineEvent::Line(l)).expect("capacity reserved");
        }
        if let Some(e) = error {
            tx.tx.try_send(LineEvent::Error(e)).expect("capacity reserved");
        }
        stream
    }
}

/// Sending half, owned by a provider task. Dropping it ends the stream.
#[derive(Debug, Clone)]
pub struct LineSink {
    tx: mpsc::Sender<LineEvent>,
    started: Instant,
}

impl LineSink {
    /// Sends a line stamped with the time since the sink was created.
    /// Returns false once the consumer has gone away.
    pub async fn line(&self, text: String) -> bool {
        let offset_ms = self.started.elapsed().as_millis() as u64;
        self.send_at(text, offset_ms).await
    }

    pub async fn send_at(&self, text: String, offset_ms: u64) -> bool {
        self.tx
            .send(LineEvent::Line(StreamLine { text, offset_ms }))
            .await
            .is_ok()
    }

    pub async fn fail(self, error: GatewayError) {
        let _ = self.tx.send(LineEvent::Error(error)).await;
    }
}

pub fn line_channel(capacity: usize) -> (LineSink, LineStream) {
    let (tx, rx) = mpsc::channel(capacity.max(1));
    (
        LineSink {
            tx,
            started: Instant::now(),
        },
        LineStream { rx, finished: false },
    )
}

/// Splits an incoming text stream on `\n`, yielding each line as soon as
/// its terminator arrives. A trailing `\r` is dropped.
#[derive(Debug, Default)]
pub struct LineSplitter {
    buf: String,
}

impl LineSplitter {
    pub fn push(&mut self, chunk: &str) -> Vec<String> {
        self.buf.push_str(chunk);
        let mut out = Vec::new();
        while let Some(i) = self.buf.find('\n') {
            let mut line: String = self.buf.drain(..=i).collect();
            line.pop();
            if line.ends_with('\r') {
                line.pop();
            }
            out.push(line);
        }
        out
    }

    /// The unterminated remainder, if non-empty.
    pub fn finish(&mut self) -> Option<String> {
        let rest = std::mem::take(&mut self.buf);
        let rest = rest.strip_suffix('\r').unwrap_or(&rest).to_string();
        (!rest.is_empty()).then_some(rest)
    }
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    /// Starts a request; errors before the first byte are returned
    /// directly, later ones arrive as the stream's terminal event.
    async fn stream_chat(&self, messages: Vec<ChatMessage>) -> Result<LineStream, GatewayError>;
}
