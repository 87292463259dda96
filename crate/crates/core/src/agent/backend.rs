//! Model backends: a scripted replay backend and an OpenAI-compatible HTTP
//! client, plus the single-step driver with retries.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Message, Role, ToolCall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

pub struct CompletionRequest<'a> {
    pub messages: &'a [Message],
    /// Whether the run_cypher tool is offered.
    pub tools: bool,
}

/// Raw backend reply before interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Completion {
    pub text: String,
    pub tool_call: Option<String>,
    pub tool_call_id: Option<String>,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Network or server trouble; worth retrying.
    #[error("backend transport error: {0}")]
    Transport(String),
    /// The backend answered with something unusable.
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendAction {
    ToolCall(ToolCall),
    FinalText(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::ZERO,
        }
    }
}

/// One backend turn. Returns the interpreted action, the assistant message to
/// append and any usage the backend reported. `call_index` numbers tool
/// calls that arrive without an id.
pub fn step(
    backend: &dyn Backend,
    messages: &[Message],
    tools: bool,
    retry: &RetryPolicy,
    call_index: usize,
) -> Result<(BackendAction, Message, Option<Usage>), BackendError> {
    if messages.last().is_some_and(|m| m.role == Role::Assistant) {
        return Err(BackendError::Protocol(
            "transcript must end with a non-assistant message".into(),
        ));
    }
    let request = CompletionRequest { messages, tools };
    let mut attempt = 0;
    let completion = loop {
        match backend.complete(&request) {
            Ok(c) => break c,
            Err(BackendError::Transport(_)) if attempt + 1 < retry.attempts.max(1) => {
                std::thread::sleep(retry.base_delay * 2u32.pow(attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let usage = completion.usage;
    let (action, message) = interpret(completion, tools, call_index);
    Ok((action, message, usage))
}

fn interpret(c: Completion, tools: bool, call_index: usize) -> (BackendAction, Message) {
    if let Some(query) = c.tool_call {
        let call = ToolCall {
            id: c.tool_call_id.unwrap_or_else(|| format!("call_{call_index}")),
            query,
            from_text: false,
        };
        let msg = Message::generated(&c.text, Some(call.clone()));
        return (BackendAction::ToolCall(call), msg);
    }
    if tools && !c.text.contains("<answer>") {
        if let Some(query) = fenced_cypher(&c.text) {
            let call = ToolCall {
                id: format!("call_{call_index}"),
                query,
                from_text: true,
            };
            let msg = Message::generated(&c.text, Some(call.clone()));
            return (BackendAction::ToolCall(call), msg);
        }
    }
    let msg = Message::generated(&c.text, None);
    (BackendAction::FinalText(c.text), msg)
}

/// Body of the first ```cypher fenced block.
fn fenced_cypher(text: &str) -> Option<String> {
    let lower = text.to_ascii_lowercase();
    let start = lower.find("```cypher")? + "```cypher".len();
    let rest = &text[start..];
    let end = rest.find("```")?;
    let q = rest[..end].trim();
    (!q.is_empty()).then(|| q.to_string())
}

/// One scripted assistant reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", from = "RawEntry")]
pub enum ScriptEntry {
    ToolCall(String),
    Text(String),
    /// Simulated transient failure; consumes the entry.
    TransportError(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Bare(String),
    Tagged(TaggedEntry),
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum TaggedEntry {
    ToolCall(String),
    Text(String),
    TransportError(String),
}

impl From<RawEntry> for ScriptEntry {
    fn from(raw: RawEntry) -> Self {
        match raw {
            RawEntry::Bare(t) | RawEntry::Tagged(TaggedEntry::Text(t)) => ScriptEntry::Text(t),
            RawEntry::Tagged(TaggedEntry::ToolCall(q)) => ScriptEntry::ToolCall(q),
            RawEntry::Tagged(TaggedEntry::TransportError(m)) => ScriptEntry::TransportError(m),
        }
    }
}

/// Replays a fixed list of replies in order.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        ScriptedBackend {
            entries,
            cursor: Mutex::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Ok(ScriptedBackend::new(entries))
    }

    /// Replies consumed so far.
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let Some(entry) = self.entries.get(*cursor) else {
            return Err(BackendError::Protocol(format!(
                "script exhausted after {} replies",
                self.entries.len()
            )));
        };
        *cursor += 1;
        match entry {
            ScriptEntry::ToolCall(q) => Ok(Completion {
                tool_call: Some(q.clone()),
                ..Completion::default()
            }),
            ScriptEntry::Text(t) => Ok(Completion {
                text: t.clone(),
                ..Completion::default()
            }),
            ScriptEntry::TransportError(m) => Err(BackendError::Transport(m.clone())),
        }
    }
}

/// Script file contents: one reply list, or reply lists keyed by case id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scripts {
    Single(Vec<ScriptEntry>),
    PerCase(BTreeMap<String, Vec<ScriptEntry>>),
}

impl Scripts {
    pub fn for_case(&self, id: &str) -> Option<&[ScriptEntry]> {
        match self {
            Scripts::Single(s) => Some(s),
            Scripts::PerCase(m) => m.get(id).map(Vec::as_slice),
        }
    }
}

pub fn load_scripts(path: impl AsRef<Path>) -> Result<Scripts, String> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Server root; requests go to `{base}/v1/chat/completions`.
    pub base: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_concurrent: usize,
}

impl HttpConfig {
    pub fn new(base: &str, model: &str) -> Self {
        HttpConfig {
            base: base.trim_end_matches('/').to_string(),
            api_key: None,
            model: model.to_string(),
            temperature: 0.0,
            timeout: Duration::from_secs(120),
            max_concurrent: 4,
        }
    }

    /// Reads SGG_API_BASE, SGG_API_KEY and SGG_MODEL.
    pub fn from_env() -> Result<Self, String> {
        let base = std::env::var("SGG_API_BASE").unwrap_or_else(|_| "https://api.openai.com".to_string());
        let model = std::env::var("SGG_MODEL").map_err(|_| "SGG_MODEL is not set".to_string())?;
        let mut cfg = HttpConfig::new(&base, &model);
        cfg.api_key = std::env::var("SGG_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

/// OpenAI-compatible chat-completions client declaring a single
/// `run_cypher(query)` tool.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            config,
            agent,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.config.max_concurrent.max(1) {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
    }

    fn release(&self) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.freed.notify_one();
    }

    fn post(&self, body: &Value) -> Result<Completion, BackendError> {
        let url = format!("{}/v1/chat/completions", self.config.base);
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => parse_response(&text),
            429 | 500..=599 => Err(BackendError::Transport(format!("HTTP {status}: {}", snippet(&text)))),
            _ => Err(BackendError::Protocol(format!("HTTP {status}: {}", snippet(&text)))),
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let body = request_body(&self.config.model, self.config.temperature, request);
        self.acquire();
        let out = self.post(&body);
        self.release();
        out
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

fn tool_schema() -> Value {
    json!([{
        "type": "function",
        "function": {
            "name": "run_cypher",
            "description": "Run a Cypher query against the 3D scene graph database and return the result table.",
            "parameters": {
                "type": "object",
                "properties": {"query": {"type": "string", "description": "Cypher query text"}},
                "required": ["query"]
            }
        }
    }])
}

/// Chat-completions request body for `request`.
pub(crate) fn request_body(model: &str, temperature: f64, request: &CompletionRequest<'_>) -> Value {
    let messages: Vec<Value> = request.messages.iter().map(wire_message).collect();
    let mut body = json!({
        "model": model,
        "messages": messages,
        "temperature": temperature,
    });
    if request.tools {
        body["tools"] = tool_schema();
        body["parallel_tool_calls"] = json!(false);
    }
    body
}

fn wire_message(m: &Message) -> Value {
    match m.role {
        Role::System => json!({"role": "system", "content": m.text}),
        Role::User => json!({"role": "user", "content": m.text}),
        Role::Assistant => match &m.tool_call {
            Some(call) if !call.from_text => json!({
                "role": "assistant",
                "content": if m.text.is_empty() { Value::Null } else { json!(m.text) },
                "tool_calls": [{
                    "id": call.id,
                    "type": "function",
                    "function": {"name": "run_cypher", "arguments": json!({"query": call.query}).to_string()}
                }]
            }),
            _ => json!({"role": "assistant", "content": m.text}),
        },
        Role::Tool => match &m.tool_call_id {
            Some(id) => json!({"role": "tool", "tool_call_id": id, "content": m.text}),
            None => json!({"role": "user", "content": m.text}),
        },
    }
}

pub(crate) fn parse_response(text: &str) -> Result<Completion, BackendError> {
    let bad = |what: &str| BackendError::Protocol(format!("malformed completion: {what}"));
    let v: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let msg = v
        .pointer("/choices/0/message")
        .ok_or_else(|| bad("missing choices[0].message"))?;
    let content = msg.get("content").and_then(Value::as_str).unwrap_or("").to_string();
    let mut out = Completion {
        text: content,
        ..Completion::default()
    };
    if let Some(call) = msg.get("tool_calls").and_then(|c| c.get(0)) {
        let name = call.pointer("/function/name").and_then(Value::as_str).unwrap_or("");
        if name != "run_cypher" {
            return Err(bad(&format!("unknown tool `{name}`")));
        }
        let args = call
            .pointer("/function/arguments")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("tool call without arguments"))?;
        let args: Value = serde_json::from_str(args).map_err(|e| bad(&format!("tool arguments: {e}")))?;
        let query = args
            .get("query")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("tool arguments lack a `query` string"))?;
        out.tool_call = Some(query.to_string());
        out.tool_call_id = call.get("id").and_then(Value::as_str).map(str::to_string);
    }
    if let Some(u) = v.get("usage") {
        if let (Some(p), Some(c)) = (
            u.get("prompt_tokens").and_then(Value::as_u64),
            u.get("completion_tokens").and_then(Value::as_u64),
        ) {
            out.usage = Some(Usage {
                prompt_tokens: p as usize,
                completion_tokens: c as usize,
            });
        }
    }
    Ok(out)
}
