//! LLM agent: prompt assembly, backends and the tool-call loop.

mod backend;
mod prompt;
mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use backend::{
    load_scripts, step, Backend, BackendAction, BackendError, Completion, CompletionRequest, HttpBackend, HttpConfig,
    RetryPolicy, ScriptEntry, ScriptedBackend, Scripts, Usage,
};
pub use prompt::{
    answer_footer, build_prompt, labelspace_text, PromptSpec, CYPHER_SCHEMA, FORCE_FINAL, PDDL_DOMAIN,
    SINGLE_FINAL_PROMPT, TEXT_RESULT_PREFIX,
};
pub use session::{run_session, SessionConfig, SessionOutcome, SessionResult, TokenSource, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Qa,
    Pddl,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa" => Ok(Task::Qa),
            "pddl" => Ok(Task::Pddl),
            _ => Err(format!("unknown task `{s}` (expected qa or pddl)")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Qa => "qa",
            Task::Pddl => "pddl",
        })
    }
}

/// Pipeline variant: free tool use, exactly one tool call in two phases, or
/// the whole graph in the prompt with no tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Agentic,
    Single,
    Context,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "agentic" => Ok(Mode::Agentic),
            "single" => Ok(Mode::Single),
            "context" => Ok(Mode::Context),
            _ => Err(format!("unknown mode `{s}` (expected agentic, single or context)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Agentic => "agentic",
            Mode::Single => "single",
            Mode::Context => "context",
        })
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

/// Token bucket a message is billed to: prompt input (I), tool results (T)
/// or model output (O).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenCategory {
    #[serde(rename = "I")]
    Input,
    #[serde(rename = "T")]
    Tool,
    #[serde(rename = "O")]
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub query: String,
    /// True when the call arrived as a fenced block in plain text.
    pub from_text: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tool_call: Option<ToolCall>,
    /// Call answered by a tool message; absent for text-mode results.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tool_call_id: Option<String>,
    pub category: TokenCategory,
    pub tokens: usize,
}

impl Message {
    fn new(role: Role, text: &str, category: TokenCategory) -> Message {
        Message {
            role,
            text: text.to_string(),
            tool_call: None,
            tool_call_id: None,
            category,
            tokens: count_tokens(text),
        }
    }

    pub fn system(text: &str) -> Message {
        Message::new(Role::System, text, TokenCategory::Input)
    }

    pub fn user(text: &str) -> Message {
        Message::new(Role::User, text, TokenCategory::Input)
    }

    /// Assistant turn written into the prompt as an in-context example.
    pub fn example_reply(text: &str) -> Message {
        Message::new(Role::Assistant, text, TokenCategory::Input)
    }

    /// Assistant turn produced by the backend.
    pub fn generated(text: &str, tool_call: Option<ToolCall>) -> Message {
        let mut m = Message::new(Role::Assistant, text, TokenCategory::Output);
        if let Some(call) = &tool_call {
            if !call.from_text {
                m.tokens += count_tokens(&call.query);
            }
        }
        m.tool_call = tool_call;
        m
    }

    pub fn tool_result(text: &str, call: &ToolCall) -> Message {
        if call.from_text {
            let mut m = Message::new(Role::Tool, &format!("{TEXT_RESULT_PREFIX}{text}"), TokenCategory::Tool);
            m.tool_call_id = None;
            m
        } else {
            let mut m = Message::new(Role::Tool, text, TokenCategory::Tool);
            m.tool_call_id = Some(call.id.clone());
            m
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("configuration error: {0}")]
    Config(String),
}

/// Approximate token count: one token per four bytes, rounded up.
pub fn count_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    Found(String),
    Missing,
    Multiple,
}

const OPEN_TAG: &str = "<answer>";
const CLOSE_TAG: &str = "</answer>";

/// Trimmed content of the single `<answer>...</answer>` pair in `text`.
pub fn extract_answer(text: &str) -> Extraction {
    let opens = text.matches(OPEN_TAG).count();
    if opens > 1 {
        return Extraction::Multiple;
    }
    let Some(start) = text.find(OPEN_TAG) else {
        return Extraction::Missing;
    };
    let body = &text[start + OPEN_TAG.len()..];
    match body.find(CLOSE_TAG) {
        Some(end) => Extraction::Found(body[..end].trim().to_string()),
        None => Extraction::Missing,
    }
}
