//! Clients for the external AI services the agent depends on: LLM
//! completion, icon captioning and OCR.
//!
//! Every service has a behavioral trait, one network implementation (LLM
//! only) and a deterministic in-memory double so the whole pipeline runs
//! offline.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::BBox;
use crate::raster::Image;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("transport error{}: {reason}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, reason: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out")]
    Timeout,
    #[error("scripted client has no replies left")]
    OutOfScript,
    #[error("client configuration: {0}")]
    Config(String),
}

/// Text completion backend.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, image: Option<&Image>) -> Result<String, ClientError>;
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, prompt: &str, image: Option<&Image>) -> Result<String, ClientError> {
        (**self).complete(prompt, image)
    }
}

/// What a captioner gets to see of an icon.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionQuery {
    pub bbox: BBox,
    /// Stable lookup key; see [`CaptionQuery::for_bbox`].
    pub fingerprint: String,
}

impl CaptionQuery {
    /// Fingerprints an icon by its box rounded to whole pixels,
    /// `"x0,y0,x1,y1"`.
    pub fn for_bbox(bbox: BBox) -> Self {
        let fingerprint = format!(
            "{},{},{},{}",
            bbox.x_min.round(),
            bbox.y_min.round(),
            bbox.x_max.round(),
            bbox.y_max.round()
        );
        Self { bbox, fingerprint }
    }
}

/// Short textual description of an icon.
pub trait IconCaptioner: Send + Sync {
    fn caption(&self, query: &CaptionQuery) -> Result<String, ClientError>;
}

/// Text lines found in an image.
pub trait OcrClient: Send + Sync {
    fn recognize(&self, image: &Image) -> Result<Vec<(String, BBox)>, ClientError>;
}

/// Fingerprint → caption table; misses caption as the empty string.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableCaptioner {
    table: HashMap<String, String>,
}

impl TableCaptioner {
    pub fn new(table: HashMap<String, String>) -> Self {
        Self { table }
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self { table: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect() }
    }

    /// Reads a JSON object mapping fingerprints to captions.
    pub fn from_json(text: &str) -> Result<Self, ClientError> {
        serde_json::from_str(text)
            .map(Self::new)
            .map_err(|e| ClientError::Config(format!("caption table: {e}")))
    }
}

impl IconCaptioner for TableCaptioner {
    fn caption(&self, query: &CaptionQuery) -> Result<String, ClientError> {
        Ok(self.table.get(&query.fingerprint).cloned().unwrap_or_default())
    }
}

/// OCR double returning a fixed set of lines, clipped to the image.
#[derive(Debug, Clone, Default)]
pub struct FixedOcr {
    pub lines: Vec<(String, BBox)>,
}

impl OcrClient for FixedOcr {
    fn recognize(&self, image: &Image) -> Result<Vec<(String, BBox)>, ClientError> {
        let (w, h) = (image.width() as f64, image.height() as f64);
        Ok(self
            .lines
            .iter()
            .map(|(t, b)| (t.clone(), b.clip(w, h)))
            .filter(|(_, b)| !b.is_degenerate())
            .collect())
    }
}

/// Replays canned replies in order, then fails with
/// [`ClientError::OutOfScript`]. Holds a cursor, so use one per episode.
#[derive(Debug)]
pub struct ScriptedLlm {
    replies: Vec<String>,
    cursor: AtomicUsize,
}

impl ScriptedLlm {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Result<Self, ClientError> {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        if replies.is_empty() {
            return Err(ClientError::Config("scripted client needs at least one reply".into()));
        }
        Ok(Self { replies, cursor: AtomicUsize::new(0) })
    }

    /// Splits a script file into replies. Replies are separated by lines
    /// consisting of `---`.
    pub fn parse_script(text: &str) -> Vec<String> {
        let mut replies = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            if line.trim_end() == "---" {
                replies.push(current.join("\n"));
                current.clear();
            } else {
                current.push(line);
            }
        }
        replies.push(current.join("\n"));
        replies.into_iter().map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect()
    }

    pub fn from_script(text: &str) -> Result<Self, ClientError> {
        Self::new(Self::parse_script(text))
    }

    pub fn remaining(&self) -> usize {
        self.replies.len().saturating_sub(self.cursor.load(Ordering::SeqCst))
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, _prompt: &str, _image: Option<&Image>) -> Result<String, ClientError> {
        let i = self.cursor.fetch_add(1, Ordering::SeqCst);
        self.replies.get(i).cloned().ok_or(ClientError::OutOfScript)
    }
}

pub const ENV_ENDPOINT: &str = "GUIS_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "GUIS_LLM_MODEL";
pub const ENV_API_KEY: &str = "GUIS_LLM_API_KEY";
pub const ENV_TIMEOUT_MS: &str = "GUIS_LLM_TIMEOUT_MS";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpLlmConfig {
    /// Full URL of a chat-completions style endpoint.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    /// Budget for a single request.
    pub timeout: Duration,
    /// Extra attempts after a transient failure.
    pub retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff: Duration,
}

impl HttpLlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            timeout: Duration::from_millis(30_000),
            retries: 2,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn from_env() -> Result<Self, ClientError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Builds a config from an arbitrary variable source.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ClientError> {
        let endpoint = get(ENV_ENDPOINT).ok_or_else(|| ClientError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = get(ENV_MODEL).ok_or_else(|| ClientError::Config(format!("{ENV_MODEL} is not set")))?;
        let mut cfg = Self::new(endpoint, model, get(ENV_API_KEY).filter(|k| !k.is_empty()));
        if let Some(ms) = get(ENV_TIMEOUT_MS) {
            let ms: u64 = ms
                .trim()
                .parse()
                .map_err(|_| ClientError::Config(format!("{ENV_TIMEOUT_MS}={ms:?} is not a number")))?;
            cfg.timeout = Duration::from_millis(ms);
        }
        Ok(cfg)
    }
}

/// Chat-completions client over HTTP.
pub struct HttpLlm {
    cfg: HttpLlmConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(ClientError),
    Fail(ClientError),
}

impl HttpLlm {
    pub fn new(cfg: HttpLlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, agent }
    }

    pub fn config(&self) -> &HttpLlmConfig {
        &self.cfg
    }

    fn attempt(&self, key: &str, body: &str) -> Attempt {
        let sent = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send(body);
        let mut resp = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Fail(ClientError::Timeout),
            Err(e @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                return Attempt::Retry(ClientError::Transport { status: None, reason: e.to_string() })
            }
            Err(e) => return Attempt::Fail(ClientError::Transport { status: None, reason: e.to_string() }),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Fail(ClientError::Timeout),
            Err(e) => return Attempt::Retry(ClientError::Transport { status: Some(status), reason: e.to_string() }),
        };
        match status {
            200..=299 => match extract_reply(&text) {
                Some(reply) => Attempt::Done(reply),
                None => Attempt::Fail(ClientError::Transport {
                    status: Some(status),
                    reason: "response has no choices[0].message.content".into(),
                }),
            },
            401 | 403 => Attempt::Fail(ClientError::Auth(format!("status {status}"))),
            429 | 500..=599 => Attempt::Retry(ClientError::Transport { status: Some(status), reason: truncate(&text) }),
            _ => Attempt::Fail(ClientError::Transport { status: Some(status), reason: truncate(&text) }),
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

fn extract_reply(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

/// Request body sent by [`HttpLlm`].
pub fn chat_request_body(model: &str, prompt: &str) -> Value {
    json!({"model": model, "messages": [{"role": "user", "content": prompt}]})
}

impl LlmClient for HttpLlm {
    fn complete(&self, prompt: &str, image: Option<&Image>) -> Result<String, ClientError> {
        let key = self
            .cfg
            .api_key
            .as_deref()
            .ok_or_else(|| ClientError::Auth(format!("{ENV_API_KEY} is not set")))?;
        if image.is_some() {
            log::warn!("image attachments are not supported by the HTTP client; sending text only");
        }
        let body = chat_request_body(&self.cfg.model, prompt).to_string();
        let mut delay = self.cfg.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(key, &body) {
                Attempt::Done(reply) => return Ok(reply),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.cfg.retries => return Err(e),
                Attempt::Retry(e) => {
                    log::debug!("llm request failed ({e}), retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }
}
