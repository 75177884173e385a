//! Inference backends reached over a chat-completions HTTP API.

mod clean;
mod client;
pub mod mock;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

pub use clean::{clean_output, LLAVA_MARKERS};
pub use client::{BackendClient, InferenceRequest};

/// Request headers identifying the work item. Real endpoints ignore them; the
/// mock server keys its fixtures on them.
pub const HEADER_IMAGE: &str = "x-vlmbench-image";
pub const HEADER_COLUMN: &str = "x-vlmbench-column";
pub const HEADER_RUN: &str = "x-vlmbench-run";

pub const COMPLETIONS_PATH: &str = "/v1/chat/completions";

/// Output-cleaning discipline applied to every reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    /// Reply may echo the prompt followed by a chat-template marker.
    LlavaStyle,
    /// Reply is already the trimmed continuation.
    QwenStyle,
    Generic,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::LlavaStyle => "llava-style",
            BackendKind::QwenStyle => "qwen-style",
            BackendKind::Generic => "generic",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "llava-style" | "llava" => Ok(BackendKind::LlavaStyle),
            "qwen-style" | "qwen" => Ok(BackendKind::QwenStyle),
            "generic" => Ok(BackendKind::Generic),
            other => Err(format!(
                "unknown backend kind `{other}` (expected llava-style, qwen-style or generic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendSpec {
    /// Base URL; requests go to `{url}/v1/chat/completions`.
    pub url: String,
    pub kind: BackendKind,
    pub model_name: String,
    pub request_timeout: Duration,
    pub max_retries: u32,
}

impl BackendSpec {
    pub fn new(url: impl Into<String>) -> Self {
        BackendSpec {
            url: url.into(),
            kind: BackendKind::Generic,
            model_name: "default".into(),
            request_timeout: Duration::from_secs(120),
            max_retries: 2,
        }
    }
}

/// An input image. `file_name` is the results row key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ImageRef {
    pub file_name: String,
    pub path: PathBuf,
}

impl ImageRef {
    pub fn read_bytes(&self) -> std::io::Result<Vec<u8>> {
        std::fs::read(&self.path)
    }

    pub fn mime_type(&self) -> &'static str {
        let lower = self.file_name.to_ascii_lowercase();
        if lower.ends_with(".png") {
            "image/png"
        } else {
            "image/jpeg"
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawInference {
    pub raw_text: String,
    pub generated_tokens: u32,
    pub token_limit: u32,
    pub prompt_echoed: bool,
    pub kind: BackendKind,
}

impl RawInference {
    /// The generation used its whole budget; the answer may be cut off.
    pub fn truncated(&self) -> bool {
        self.generated_tokens == self.token_limit
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("image `{0}` is empty")]
    EmptyImage(String),
}
