//! The tool-call loop.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::backend::{step, Backend, BackendAction, RetryPolicy, Usage};
use super::prompt::{build_prompt, FORCE_FINAL, SINGLE_FINAL_PROMPT};
use super::{extract_answer, AgentError, Extraction, Message, Mode, PromptSpec, TokenCategory};
use crate::query::{execute, execute_mut, parse_query, render_result, Limits, DEFAULT_MAX_ROWS};
use crate::scene_graph::PropertyGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub mode: Mode,
    pub max_calls: usize,
    pub limits: Limits,
    /// Rows shown per tool result before truncation.
    pub max_rows: usize,
    pub retry: RetryPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: Mode::Agentic,
            max_calls: 5,
            limits: Limits::default(),
            max_rows: DEFAULT_MAX_ROWS,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SessionOutcome {
    Answer { text: String },
    ExtractionFailure { reason: String },
    SessionFailure { reason: String },
}

/// Where message token counts came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenSource {
    /// Byte-length estimate; approximate.
    Heuristic,
    /// Usage figures reported by the backend for every call.
    Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub mode: Mode,
    pub max_calls: usize,
    pub messages: Vec<Message>,
    pub input_tokens: usize,
    pub tool_tokens: usize,
    pub output_tokens: usize,
    pub tool_calls: usize,
    pub backend_calls: usize,
    pub token_source: TokenSource,
    pub outcome: SessionOutcome,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    fn total(&self, category: TokenCategory) -> usize {
        self.messages
            .iter()
            .filter(|m| m.category == category)
            .map(|m| m.tokens)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionResult {
    pub transcript: Transcript,
}

impl SessionResult {
    pub fn answer(&self) -> Option<&str> {
        match &self.transcript.outcome {
            SessionOutcome::Answer { text } => Some(text),
            _ => None,
        }
    }
}

/// Run one question or instruction to completion. Queries that SET
/// properties act on a private copy of `graph`.
pub fn run_session(
    backend: &dyn Backend,
    graph: &PropertyGraph,
    spec: &PromptSpec,
    config: &SessionConfig,
) -> Result<SessionResult, AgentError> {
    let mut messages = build_prompt(spec)?;
    let mut graph = Cow::Borrowed(graph);
    let tools = config.mode != Mode::Context;
    let mut calls = 0;
    let mut forced = false;
    let mut invocations = 0;
    let mut all_usage = true;
    let mut last_total: Option<usize> = None;
    let mut pending = 0;

    let outcome = loop {
        let reply = step(backend, &messages, tools, &config.retry, calls);
        invocations += 1;
        let (action, mut reply_msg, usage) = match reply {
            Ok(r) => r,
            Err(e) => {
                break SessionOutcome::SessionFailure { reason: e.to_string() };
            }
        };
        match usage {
            Some(u) => apply_usage(&mut messages[pending..], &mut reply_msg, u, &mut last_total),
            None => all_usage = false,
        }
        messages.push(reply_msg);
        pending = messages.len();
        let failure = |reason: &str| SessionOutcome::SessionFailure {
            reason: reason.to_string(),
        };
        match action {
            BackendAction::ToolCall(call) => match config.mode {
                Mode::Context => break failure("tool calls are not available in context mode"),
                Mode::Single if calls >= 1 => break failure("single mode permits exactly one tool call"),
                Mode::Agentic if forced => break failure("tool call attempted after the tool-call limit"),
                Mode::Agentic if calls >= config.max_calls => {
                    messages.push(Message::tool_result(FORCE_FINAL, &call));
                    forced = true;
                }
                _ => {
                    let result = run_tool(&mut graph, &call.query, config);
                    messages.push(Message::tool_result(&result, &call));
                    calls += 1;
                    if config.mode == Mode::Single {
                        messages.push(Message::system(SINGLE_FINAL_PROMPT));
                    }
                }
            },
            BackendAction::FinalText(text) => {
                if config.mode == Mode::Single && calls == 0 {
                    break failure("single mode requires one tool call before the final answer");
                }
                break match extract_answer(&text) {
                    Extraction::Found(answer) => SessionOutcome::Answer { text: answer },
                    Extraction::Missing => SessionOutcome::ExtractionFailure {
                        reason: "no <answer> tags in final response".into(),
                    },
                    Extraction::Multiple => SessionOutcome::ExtractionFailure {
                        reason: "more than one pair of <answer> tags".into(),
                    },
                };
            }
        }
    };

    let mut transcript = Transcript {
        mode: config.mode,
        max_calls: config.max_calls,
        messages,
        input_tokens: 0,
        tool_tokens: 0,
        output_tokens: 0,
        tool_calls: calls,
        backend_calls: invocations,
        token_source: if all_usage && invocations > 0 {
            TokenSource::Backend
        } else {
            TokenSource::Heuristic
        },
        outcome,
    };
    transcript.input_tokens = transcript.total(TokenCategory::Input);
    transcript.tool_tokens = transcript.total(TokenCategory::Tool);
    transcript.output_tokens = transcript.total(TokenCategory::Output);
    Ok(SessionResult { transcript })
}

fn run_tool(graph: &mut Cow<'_, PropertyGraph>, text: &str, config: &SessionConfig) -> String {
    let query = match parse_query(text) {
        Ok(q) => q,
        Err(e) => return e.to_string(),
    };
    let result = if query.is_mutating() {
        execute_mut(graph.to_mut(), &query, &config.limits)
    } else {
        execute(graph, &query, &config.limits)
    };
    match result {
        Ok(table) => render_result(&table, config.max_rows),
        Err(e) => e.to_string(),
    }
}

/// Replace heuristic counts with reported usage. The prompt-token growth
/// since the previous call is spread over the messages added since then in
/// proportion to their estimates.
fn apply_usage(fresh: &mut [Message], reply: &mut Message, usage: Usage, last_total: &mut Option<usize>) {
    let before = last_total.unwrap_or(0);
    if usage.prompt_tokens >= before {
        spread(fresh, usage.prompt_tokens - before);
    }
    reply.tokens = usage.completion_tokens;
    *last_total = Some(usage.prompt_tokens + usage.completion_tokens);
}

fn spread(msgs: &mut [Message], total: usize) {
    if msgs.is_empty() {
        return;
    }
    let weights: Vec<usize> = msgs.iter().map(|m| m.tokens.max(1)).collect();
    let sum: usize = weights.iter().sum();
    let mut parts: Vec<(usize, usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let exact = total * w;
            (i, exact / sum, exact % sum)
        })
        .collect();
    let assigned: usize = parts.iter().map(|p| p.1).sum();
    parts.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    for p in parts.iter_mut().take(total - assigned) {
        p.1 += 1;
    }
    for (i, share, _) in parts {
        msgs[i].tokens = share;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_preserves_total() {
        let mut msgs = vec![Message::system("aaaa aaaa"), Message::user("b"), Message::system("")];
        spread(&mut msgs, 10);
        assert_eq!(msgs.iter().map(|m| m.tokens).sum::<usize>(), 10);
        assert!(msgs[0].tokens >= msgs[1].tokens);
        spread(&mut msgs, 0);
        assert!(msgs.iter().all(|m| m.tokens == 0));
    }
}
