//! Deterministic chat-completions server driven by a fixture file.
//!
//! Fixture lines have six `|`-separated fields:
//!
//! ```text
//! image_name | column | run_index_or_* | generated_tokens | echo(0/1) | response text
//! ```
//!
//! `image_name` may also be `*`. The response text runs to the end of the
//! line and understands the escapes `\n` and `\\`. Blank lines and lines
//! starting with `#` are ignored.
//!
//! Requests are matched on the `x-vlmbench-*` headers sent by
//! [`BackendClient`](super::BackendClient); the most specific fixture wins
//! (exact image before `*`, then exact run before `*`). Unmatched requests get
//! a 404. Replies depend only on the request, never on arrival order.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::{COMPLETIONS_PATH, HEADER_COLUMN, HEADER_IMAGE, HEADER_RUN};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureReply {
    pub generated_tokens: u32,
    pub echo: bool,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RunSel {
    Any,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    image: Option<String>,
    column: String,
    run: RunSel,
}

#[derive(Debug, Clone, Default)]
pub struct MockFixtures {
    entries: HashMap<Key, FixtureReply>,
}

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("cannot read fixtures {0}")]
    Io(String),
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: SocketAddr, message: String },
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

impl MockFixtures {
    pub fn parse(source: &str) -> Result<Self, MockError> {
        let mut entries = HashMap::new();
        for (i, line) in source.lines().enumerate() {
            let lineno = i + 1;
            let err = |message: String| MockError::Fixture {
                line: lineno,
                message,
            };
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(6, '|').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 `|`-separated fields, found {}", fields.len())));
            }
            let image = match fields[0].trim() {
                "" => return Err(err("empty image name".into())),
                "*" => None,
                name => Some(name.to_string()),
            };
            let column = fields[1].trim().to_string();
            if column.is_empty() {
                return Err(err("empty column".into()));
            }
            let run = match fields[2].trim() {
                "*" => RunSel::Any,
                n => RunSel::Index(
                    n.parse()
                        .ok()
                        .filter(|&r: &usize| r >= 1)
                        .ok_or_else(|| err(format!("run index `{n}` is not `*` or an integer >= 1")))?,
                ),
            };
            let generated_tokens = fields[3]
                .trim()
                .parse()
                .map_err(|_| err(format!("generated_tokens `{}` is not an integer", fields[3].trim())))?;
            let echo = match fields[4].trim() {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("echo flag `{other}` is not 0 or 1"))),
            };
            let text = unescape(fields[5].strip_prefix(' ').unwrap_or(fields[5]).trim_end());
            let key = Key { image, column, run };
            if entries.contains_key(&key) {
                return Err(err("duplicate fixture key".into()));
            }
            entries.insert(
                key,
                FixtureReply {
                    generated_tokens,
                    echo,
                    text,
                },
            );
        }
        Ok(MockFixtures { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, MockError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| MockError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&source)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Most specific fixture for a request, if any.
    pub fn lookup(&self, image: &str, column: &str, run: usize) -> Option<&FixtureReply> {
        let img = Some(image.to_string());
        [
            (img.clone(), RunSel::Index(run)),
            (img, RunSel::Any),
            (None, RunSel::Index(run)),
            (None, RunSel::Any),
        ]
        .into_iter()
        .find_map(|(image, run)| {
            self.entries.get(&Key {
                image,
                column: column.to_string(),
                run,
            })
        })
    }
}

struct AppState {
    fixtures: MockFixtures,
    requests: AtomicUsize,
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

fn error(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": { "message": message } }))).into_response()
}

fn prompt_text(body: &Value) -> Option<&str> {
    body["messages"]
        .as_array()?
        .iter()
        .filter_map(|m| m["content"].as_array())
        .flatten()
        .find(|part| part["type"] == "text")
        .and_then(|part| part["text"].as_str())
}

async fn completions(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    state.requests.fetch_add(1, Ordering::Relaxed);
    let (Some(image), Some(column), Some(run)) = (
        header(&headers, HEADER_IMAGE),
        header(&headers, HEADER_COLUMN),
        header(&headers, HEADER_RUN).and_then(|r| r.parse::<usize>().ok()),
    ) else {
        return error(StatusCode::BAD_REQUEST, "missing x-vlmbench-* headers".into());
    };
    let Some(fixture) = state.fixtures.lookup(image, column, run) else {
        return error(
            StatusCode::NOT_FOUND,
            format!("no fixture for ({image}, {column}, run {run})"),
        );
    };
    let limit = body["max_tokens"].as_u64().map_or(u32::MAX, |m| m.min(u64::from(u32::MAX)) as u32);
    let content = if fixture.echo {
        format!("[INST] {} [/INST] {}", prompt_text(&body).unwrap_or_default(), fixture.text)
    } else {
        fixture.text.clone()
    };
    let tokens = fixture.generated_tokens.min(limit);
    Json(json!({
        "id": format!("mock-{image}-{column}-{run}"),
        "object": "chat.completion",
        "model": body["model"],
        "choices": [{
            "index": 0,
            "message": { "role": "assistant", "content": content },
            "finish_reason": if tokens == limit { "length" } else { "stop" }
        }],
        "usage": { "prompt_tokens": 0, "completion_tokens": tokens, "total_tokens": tokens }
    }))
    .into_response()
}

/// A running mock server. Dropping the handle without calling
/// [`MockServer::shutdown`] leaves the server running until the runtime stops.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<AppState>,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub async fn start(fixtures: MockFixtures, addr: SocketAddr) -> Result<Self, MockError> {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| MockError::Bind {
                addr,
                message: e.to_string(),
            })?;
        let addr = listener.local_addr().map_err(|e| MockError::Bind {
            addr,
            message: e.to_string(),
        })?;
        let state = Arc::new(AppState {
            fixtures,
            requests: AtomicUsize::new(0),
        });
        let app = Router::new()
            .route(COMPLETIONS_PATH, post(completions))
            .with_state(state.clone());
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await;
        });
        Ok(MockServer {
            addr,
            state,
            stop: Some(stop),
            task,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.state.requests.load(Ordering::Relaxed)
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let _ = (&mut self.task).await;
    }

    /// Serves until the task is cancelled.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

/// Loads `fixtures` and serves them on `127.0.0.1:port`.
pub async fn serve_mock(fixtures: &Path, port: u16) -> Result<MockServer, MockError> {
    let fixtures = MockFixtures::from_path(fixtures)?;
    MockServer::start(fixtures, SocketAddr::from(([127, 0, 0, 1], port))).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fixture_lines() {
        let f = MockFixtures::parse(
            "# header\nS27.jpg | vehicles | * | 1 | 0 | 3\n\nS27.jpg|vehicles|2|1|0|4\n* | sidewalk | * | 50 | 1 | yes\\nreally | truly\n",
        )
        .unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.lookup("S27.jpg", "vehicles", 1).unwrap().text, "3");
        assert_eq!(f.lookup("S27.jpg", "vehicles", 2).unwrap().text, "4");
        let s = f.lookup("D01.png", "sidewalk", 3).unwrap();
        assert_eq!(s.text, "yes\nreally | truly");
        assert!(s.echo);
        assert_eq!(s.generated_tokens, 50);
        assert!(f.lookup("D01.png", "vehicles", 1).is_none());
    }

    #[test]
    fn rejects_bad_lines() {
        for bad in [
            "a | b | c",
            "a | b | 0 | 1 | 0 | x",
            "a | b | * | many | 0 | x",
            "a | b | * | 1 | 2 | x",
            "a | b | * | 1 | 0 | x\na | b | * | 2 | 0 | y",
        ] {
            assert!(MockFixtures::parse(bad).is_err(), "{bad}");
        }
        let Err(MockError::Fixture { line, .. }) = MockFixtures::parse("\n\nx|y") else {
            panic!("expected fixture error");
        };
        assert_eq!(line, 3);
    }
}
