use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;
use serde_json::json;

use super::{
    BackendError, BackendSpec, ImageRef, RawInference, COMPLETIONS_PATH, HEADER_COLUMN,
    HEADER_IMAGE, HEADER_RUN,
};
use crate::config::GenerationParams;
use crate::prompt::PromptText;

/// Everything needed for one inference call.
#[derive(Debug, Clone, Copy)]
pub struct InferenceRequest<'a> {
    pub image: &'a ImageRef,
    pub image_bytes: &'a [u8],
    pub prompt: &'a PromptText,
    pub params: &'a GenerationParams,
    pub token_limit: u32,
    pub column: &'a str,
    /// 1-based run index within the task's consensus runs.
    pub run: usize,
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    completion_tokens: u32,
}

/// Client for one configured backend. Cheap to clone; clones share the
/// connection pool.
#[derive(Debug, Clone)]
pub struct BackendClient {
    spec: BackendSpec,
    http: reqwest::Client,
    backoff: Duration,
}

impl BackendClient {
    pub fn new(spec: BackendSpec) -> Result<Self, BackendError> {
        let http = reqwest::Client::builder()
            .timeout(spec.request_timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(BackendClient {
            spec,
            http,
            backoff: Duration::from_secs(1),
        })
    }

    /// Base delay before the first retry; doubles on each further attempt.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    fn endpoint(&self) -> String {
        format!("{}{}", self.spec.url.trim_end_matches('/'), COMPLETIONS_PATH)
    }

    fn request_body(&self, req: &InferenceRequest<'_>) -> serde_json::Value {
        let data = base64::engine::general_purpose::STANDARD.encode(req.image_bytes);
        let mut body = json!({
            "model": self.spec.model_name,
            "messages": [{
                "role": "user",
                "content": [
                    {
                        "type": "image_url",
                        "image_url": { "url": format!("data:{};base64,{data}", req.image.mime_type()) }
                    },
                    { "type": "text", "text": req.prompt.text }
                ]
            }],
            "temperature": req.params.temperature,
            "top_p": req.params.top_p,
            "max_tokens": req.token_limit,
        });
        if let Some(seed) = req.params.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    /// Sends one request, retrying transport failures and 5xx replies up to
    /// `max_retries` times.
    pub async fn infer(&self, req: InferenceRequest<'_>) -> Result<RawInference, BackendError> {
        if req.image_bytes.is_empty() {
            return Err(BackendError::EmptyImage(req.image.file_name.clone()));
        }
        let body = self.request_body(&req);
        let mut attempt = 0;
        loop {
            match self.send_once(&req, &body).await {
                Err(e) if attempt < self.spec.max_retries && retryable(&e) => {
                    let delay = self.backoff * 2u32.saturating_pow(attempt);
                    tracing::warn!(
                        image = %req.image.file_name,
                        column = req.column,
                        run = req.run,
                        "attempt {} failed ({e}); retrying in {delay:?}",
                        attempt + 1
                    );
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    async fn send_once(
        &self,
        req: &InferenceRequest<'_>,
        body: &serde_json::Value,
    ) -> Result<RawInference, BackendError> {
        let resp = self
            .http
            .post(self.endpoint())
            .header(HEADER_IMAGE, &req.image.file_name)
            .header(HEADER_COLUMN, req.column)
            .header(HEADER_RUN, req.run.to_string())
            .json(body)
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.as_u16() >= 400 {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        let reply: Reply =
            serde_json::from_str(&text).map_err(|e| BackendError::MalformedReply(e.to_string()))?;
        let raw_text = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::MalformedReply("no choices[0].message.content".into()))?;
        let usage = reply
            .usage
            .ok_or_else(|| BackendError::MalformedReply("missing usage.completion_tokens".into()))?;
        if usage.completion_tokens > req.token_limit {
            tracing::warn!(
                image = %req.image.file_name,
                column = req.column,
                "backend reported {} tokens over a limit of {}",
                usage.completion_tokens,
                req.token_limit
            );
        }
        Ok(RawInference {
            prompt_echoed: !req.prompt.text.is_empty() && raw_text.contains(&req.prompt.text),
            raw_text,
            generated_tokens: usage.completion_tokens.min(req.token_limit),
            token_limit: req.token_limit,
            kind: self.spec.kind,
        })
    }
}

fn retryable(err: &BackendError) -> bool {
    match err {
        BackendError::Transport(_) => true,
        BackendError::Status { status, .. } => *status >= 500,
        _ => false,
    }
}
