//! Uniform model access: one chat-completions style wire protocol for remote
//! models, a deterministic scripted backend for tests, and a content-addressed
//! read-through response cache. Whole-harness runs under scripted models are
//! bit-reproducible.

mod cache;
mod http;
mod script;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{ArgValue, ToolSpec};

pub use script::{load_script, ScriptFile, ScriptReply};

/// Decoding parameters. The defaults are the open-source inference settings
/// used throughout the evaluation; the harness applies them uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub max_length: usize,
    pub num_beams: usize,
    pub do_sample: bool,
    pub stop_sequences: Vec<String>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_new_tokens: 128,
            max_length: 2048,
            num_beams: 1,
            do_sample: false,
            stop_sequences: vec!["</s>".to_string()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// A structured tool call emitted by a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRequest {
    pub name: String,
    pub arguments: BTreeMap<String, ArgValue>,
}

/// One conversation turn. `tool_call` only appears on assistant turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCallRequest>,
}

impl ChatTurn {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into(), tool_call: None }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into(), tool_call: None }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into(), tool_call: None }
    }

    pub fn assistant_tool_call(name: impl Into<String>, arguments: BTreeMap<String, ArgValue>) -> Self {
        Self {
            role: Role::Assistant,
            content: String::new(),
            tool_call: Some(ToolCallRequest { name: name.into(), arguments }),
        }
    }

    pub fn tool(content: impl Into<String>) -> Self {
        Self { role: Role::Tool, content: content.into(), tool_call: None }
    }
}

/// Where completions come from.
#[derive(Debug, Clone)]
pub enum ModelBackend {
    Remote {
        endpoint: String,
        /// Name of the environment variable holding the API credential.
        credential_env: Option<String>,
    },
    Scripted(script::ScriptState),
}

/// A model the harness can talk to.
#[derive(Debug, Clone)]
pub struct ModelRef {
    pub id: String,
    pub backend: ModelBackend,
    pub supports_native_function_calls: bool,
}

impl ModelRef {
    pub fn remote(
        id: impl Into<String>,
        endpoint: impl Into<String>,
        credential_env: Option<String>,
        supports_native_function_calls: bool,
    ) -> Self {
        Self {
            id: id.into(),
            backend: ModelBackend::Remote {
                endpoint: endpoint.into(),
                credential_env,
            },
            supports_native_function_calls,
        }
    }

    pub fn scripted(id: impl Into<String>, file: ScriptFile) -> Self {
        Self {
            id: id.into(),
            backend: ModelBackend::Scripted(script::ScriptState::new(Arc::new(file))),
            supports_native_function_calls: false,
        }
    }

    pub fn with_native_function_calls(mut self, flag: bool) -> Self {
        self.supports_native_function_calls = flag;
        self
    }

    /// A copy whose scripted cursor starts over. Remote models are returned
    /// unchanged. The runner gives every (system, case) pair its own
    /// instance so cases replay independently and in parallel.
    pub fn fresh_instance(&self) -> Self {
        let backend = match &self.backend {
            ModelBackend::Scripted(state) => ModelBackend::Scripted(state.fresh()),
            remote => remote.clone(),
        };
        Self {
            id: self.id.clone(),
            backend,
            supports_native_function_calls: self.supports_native_function_calls,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("script exhausted: {0}")]
    ScriptExhausted(String),
    #[error("cannot read script {path}: {reason}")]
    UnreadablePath { path: String, reason: String },
    #[error("malformed script {path}: {reason}")]
    MalformedScript { path: String, reason: String },
    #[error("cache entry corrupt: {0}")]
    CacheCorrupt(String),
}

/// Gateway to all models. Cheap to clone; clones share the transport
/// counter, so a runner can hand one to every worker and still assert the
/// no-network guarantee afterwards.
#[derive(Clone)]
pub struct Gateway {
    transport_ops: Arc<AtomicU64>,
    retries: u32,
    backoff_base: Duration,
    timeout: Duration,
    cache_dir: Option<PathBuf>,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self {
            transport_ops: Arc::new(AtomicU64::new(0)),
            retries: 2,
            backoff_base: Duration::from_millis(250),
            timeout: Duration::from_secs(60),
            cache_dir: None,
        }
    }

    /// Route every completion through the read-through cache at `dir`.
    pub fn with_cache(mut self, dir: PathBuf) -> Self {
        self.cache_dir = Some(dir);
        self
    }

    /// Shrink the retry backoff; test servers fail fast on purpose.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// Number of network operations performed so far (every HTTP attempt
    /// counts). Scripted and cache-hit completions never move it.
    pub fn transport_ops(&self) -> u64 {
        self.transport_ops.load(Ordering::SeqCst)
    }

    /// One completion: the next assistant turn, truncated at stop sequences
    /// and at `max_new_tokens` whitespace tokens. When a cache directory is
    /// configured, identical remote requests come back from disk without
    /// touching the network. Scripted models bypass the cache: an ordered
    /// script is stateful, and serving a cached reply for a repeated prompt
    /// would hide the script's next entry (a retry must be able to see it).
    pub fn complete(
        &self,
        model: &ModelRef,
        turns: &[ChatTurn],
        params: &GenerationParams,
        tool_specs: Option<&[ToolSpec]>,
    ) -> Result<ChatTurn, GatewayError> {
        if let (Some(dir), ModelBackend::Remote { .. }) = (self.cache_dir.clone(), &model.backend)
        {
            return self.cached_complete(&dir, model, turns, params, tool_specs);
        }
        self.complete_uncached(model, turns, params, tool_specs)
    }

    fn complete_uncached(
        &self,
        model: &ModelRef,
        turns: &[ChatTurn],
        params: &GenerationParams,
        tool_specs: Option<&[ToolSpec]>,
    ) -> Result<ChatTurn, GatewayError> {
        if turns.is_empty() {
            return Err(GatewayError::Protocol("turns must be non-empty".to_string()));
        }
        let mut reply = match &model.backend {
            ModelBackend::Scripted(state) => state.next_reply(turns)?,
            ModelBackend::Remote { endpoint, credential_env } => http::complete_remote(
                endpoint,
                credential_env.as_deref(),
                &model.id,
                turns,
                params,
                tool_specs,
                self.retries,
                self.backoff_base,
                self.timeout,
                &self.transport_ops,
            )?,
        };
        reply.content = truncate_output(&reply.content, params);
        Ok(reply)
    }

    /// Read-through cache over [`Gateway::complete`]. Identical inputs return
    /// the stored turn without touching the backend.
    pub fn cached_complete(
        &self,
        cache_dir: &Path,
        model: &ModelRef,
        turns: &[ChatTurn],
        params: &GenerationParams,
        tool_specs: Option<&[ToolSpec]>,
    ) -> Result<ChatTurn, GatewayError> {
        let key = cache_key(&model.id, turns, params, tool_specs);
        if let Some(turn) = cache::read(cache_dir, &key)? {
            return Ok(turn);
        }
        let turn = self.complete_uncached(model, turns, params, tool_specs)?;
        cache::write(cache_dir, &key, &turn)?;
        Ok(turn)
    }
}

/// Cut at the first stop sequence, then cap at `max_new_tokens` whitespace
/// tokens, preserving the original separators before the cut.
fn truncate_output(content: &str, params: &GenerationParams) -> String {
    let mut cut = content.len();
    for stop in &params.stop_sequences {
        if stop.is_empty() {
            continue;
        }
        if let Some(pos) = content.find(stop.as_str()) {
            cut = cut.min(pos);
        }
    }
    let clipped = &content[..cut];
    if params.max_new_tokens == 0 {
        return String::new();
    }
    let mut tokens_seen = 0usize;
    let mut in_token = false;
    for (idx, ch) in clipped.char_indices() {
        if ch.is_whitespace() {
            in_token = false;
        } else if !in_token {
            in_token = true;
            tokens_seen += 1;
            if tokens_seen > params.max_new_tokens {
                return clipped[..idx].trim_end().to_string();
            }
        }
    }
    clipped.to_string()
}

/// Digest of the canonical JSON of the prompt turns; the documented key for
/// keyed scripts.
pub fn prompt_digest(turns: &[ChatTurn]) -> String {
    let canonical = serde_json::to_string(turns).expect("turns serialize");
    hex_digest(canonical_bytes(&canonical))
}

/// Cache key: digest of the canonical JSON of (model id, turns, params,
/// tool specs).
pub fn cache_key(
    model_id: &str,
    turns: &[ChatTurn],
    params: &GenerationParams,
    tool_specs: Option<&[ToolSpec]>,
) -> String {
    #[derive(Serialize)]
    struct KeyMaterial<'a> {
        model_id: &'a str,
        turns: &'a [ChatTurn],
        params: &'a GenerationParams,
        tool_specs: Option<&'a [ToolSpec]>,
    }
    let canonical = serde_json::to_string(&KeyMaterial {
        model_id,
        turns,
        params,
        tool_specs,
    })
    .expect("key material serializes");
    hex_digest(canonical_bytes(&canonical))
}

fn canonical_bytes(s: &str) -> &[u8] {
    s.as_bytes()
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
