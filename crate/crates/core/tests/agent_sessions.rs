use proptest::prelude::*;
use sgg_core::agent::{
    run_session, Backend, BackendError, Completion, CompletionRequest, Mode, PromptSpec, RetryPolicy, Role,
    ScriptEntry, ScriptedBackend, SessionConfig, SessionOutcome, SessionResult, Task, TokenCategory, TokenSource,
    Usage, FORCE_FINAL, SINGLE_FINAL_PROMPT,
};
use sgg_core::scene_graph::{load_graph_file, PropertyGraph};
use std::sync::Mutex;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/example_graph.json");

fn graph() -> PropertyGraph {
    load_graph_file(FIXTURE).unwrap()
}

fn config(mode: Mode) -> SessionConfig {
    SessionConfig {
        mode,
        retry: RetryPolicy::immediate(),
        ..SessionConfig::default()
    }
}

fn run(entries: Vec<ScriptEntry>, mode: Mode) -> SessionResult {
    let g = graph();
    let spec = PromptSpec::for_graph(Task::Pddl, mode, &g, "Go to object 1.", None, 5);
    run_session(&ScriptedBackend::new(entries), &g, &spec, &config(mode)).unwrap()
}

fn tool(q: &str) -> ScriptEntry {
    ScriptEntry::ToolCall(q.into())
}

fn text(t: &str) -> ScriptEntry {
    ScriptEntry::Text(t.into())
}

fn tool_messages(r: &SessionResult) -> Vec<&str> {
    r.transcript
        .messages
        .iter()
        .filter(|m| m.role == Role::Tool)
        .map(|m| m.text.as_str())
        .collect()
}

#[test]
fn two_step_session_succeeds() {
    let r = run(
        vec![
            text("```cypher\nMATCH (o:Object {nodeSymbol: 'O1'}) RETURN o.class\n```"),
            text("O1 is the vehicle. <answer>(visited-object O1)</answer>"),
        ],
        Mode::Agentic,
    );
    assert_eq!(r.answer(), Some("(visited-object O1)"));
    assert_eq!(r.transcript.tool_calls, 1);
    assert_eq!(tool_messages(&r), ["Query result:\no.class\nvehicle"]);
}

#[test]
fn query_errors_are_fed_back() {
    let r = run(
        vec![
            tool("MATCH (o:Objects) RETURN o"),
            tool("MATCH (o:Object {nodeSymbol: 'O1'}) RETURN o.nodeSymbol"),
            text("<answer>(visited-object O1)</answer>"),
        ],
        Mode::Agentic,
    );
    assert_eq!(r.answer(), Some("(visited-object O1)"));
    assert_eq!(r.transcript.tool_calls, 2);
    let tools = tool_messages(&r);
    assert!(tools[0].starts_with("unknown-identifier error"), "{}", tools[0]);
    assert!(tools[0].contains("Objects"));
    assert_eq!(tools[1], "o.nodeSymbol\nO1");
}

#[test]
fn direct_answer_uses_no_tools() {
    let r = run(vec![text("<answer>(visited-object O1)</answer>")], Mode::Agentic);
    assert_eq!(r.answer(), Some("(visited-object O1)"));
    assert_eq!(r.transcript.tool_calls, 0);
    assert_eq!(r.transcript.backend_calls, 1);
    assert_eq!(r.transcript.tool_tokens, 0);
}

#[test]
fn five_calls_are_allowed() {
    let mut entries: Vec<ScriptEntry> = (0..5).map(|_| tool("MATCH (o:Object) RETURN count(*)")).collect();
    entries.push(text("<answer>(visited-object O1)</answer>"));
    let r = run(entries, Mode::Agentic);
    assert_eq!(r.answer(), Some("(visited-object O1)"));
    assert_eq!(r.transcript.tool_calls, 5);
    assert!(tool_messages(&r).iter().all(|t| *t == "count(*)\n8"));
    assert!(!tool_messages(&r).contains(&FORCE_FINAL));
}

#[test]
fn sixth_call_triggers_forcing_message() {
    let mut entries: Vec<ScriptEntry> = (0..6).map(|_| tool("MATCH (r:Room) RETURN r.nodeSymbol")).collect();
    entries.push(text("<answer>(visited-room R0)</answer>"));
    let r = run(entries.clone(), Mode::Agentic);
    assert_eq!(r.answer(), Some("(visited-room R0)"));
    assert_eq!(r.transcript.tool_calls, 5);
    assert_eq!(r.transcript.backend_calls, 7);
    let tools = tool_messages(&r);
    assert_eq!(tools.len(), 6);
    assert_eq!(tools[5], FORCE_FINAL);

    // a further tool call after the forcing message ends the session
    entries.insert(6, tool("MATCH (n) RETURN n"));
    let r = run(entries, Mode::Agentic);
    assert!(matches!(r.transcript.outcome, SessionOutcome::SessionFailure { .. }));
    assert_eq!(r.transcript.backend_calls, 7);
}

#[test]
fn missing_or_duplicate_tags_are_extraction_failures() {
    let r = run(vec![text("(visited-object O1)")], Mode::Agentic);
    assert!(matches!(r.transcript.outcome, SessionOutcome::ExtractionFailure { .. }));
    let r = run(vec![text("<answer>a</answer><answer>b</answer>")], Mode::Agentic);
    assert!(matches!(r.transcript.outcome, SessionOutcome::ExtractionFailure { .. }));
}

#[test]
fn exhausted_script_is_a_session_failure() {
    let r = run(vec![tool("MATCH (n) RETURN count(*)")], Mode::Agentic);
    let SessionOutcome::SessionFailure { reason } = &r.transcript.outcome else {
        panic!()
    };
    assert!(reason.contains("exhausted"));
}

#[test]
fn single_mode_takes_exactly_one_call() {
    let r = run(
        vec![
            tool("MATCH (o:Object) RETURN count(*)"),
            text("<answer>(visited-object O1)</answer>"),
        ],
        Mode::Single,
    );
    assert_eq!(r.answer(), Some("(visited-object O1)"));
    assert_eq!(tool_messages(&r).len(), 1);
    assert!(r.transcript.messages.iter().any(|m| m.text == SINGLE_FINAL_PROMPT));

    let two = run(
        vec![tool("MATCH (n) RETURN count(*)"), tool("MATCH (n) RETURN count(*)")],
        Mode::Single,
    );
    assert!(matches!(two.transcript.outcome, SessionOutcome::SessionFailure { .. }));
    let none = run(vec![text("<answer>(visited-object O1)</answer>")], Mode::Single);
    assert!(matches!(none.transcript.outcome, SessionOutcome::SessionFailure { .. }));
}

#[test]
fn context_mode_refuses_tools() {
    let ok = run(vec![text("<answer>(visited-object O1)</answer>")], Mode::Context);
    assert_eq!(ok.answer(), Some("(visited-object O1)"));
    let bad = run(vec![tool("MATCH (n) RETURN n")], Mode::Context);
    assert!(matches!(bad.transcript.outcome, SessionOutcome::SessionFailure { .. }));
}

#[test]
fn set_queries_do_not_touch_the_callers_graph() {
    let g = graph();
    let spec = PromptSpec::for_graph(Task::Pddl, Mode::Agentic, &g, "x", None, 5);
    let backend = ScriptedBackend::new(vec![
        tool("MATCH (o:Object {nodeSymbol: 'O5'}) SET o.class = 'vehicle'"),
        tool("MATCH (o:Object {class: 'vehicle'}) RETURN count(*)"),
        text("<answer>(visited-object O5)</answer>"),
    ]);
    let r = run_session(&backend, &g, &spec, &config(Mode::Agentic)).unwrap();
    assert_eq!(tool_messages(&r)[1], "count(*)\n3");
    assert_eq!(g.node_by_text("O5").unwrap().class.as_deref(), Some("boat"));
}

#[test]
fn transcripts_are_byte_identical_across_runs() {
    let entries = vec![
        tool("MATCH (o:Objects) RETURN o"),
        tool("MATCH (r:Room)-[:CONTAINS*]->(o:Object) RETURN r.nodeSymbol, count(o)"),
        text("<answer>(visited-object O1)</answer>"),
    ];
    let a = run(entries.clone(), Mode::Agentic).transcript.to_json();
    let b = run(entries, Mode::Agentic).transcript.to_json();
    assert_eq!(a, b);
    assert!(a.contains("\"token_source\": \"heuristic\""));
}

#[test]
fn token_totals_match_message_sums() {
    let r = run(
        vec![
            tool("MATCH (o:Object) RETURN o"),
            text("```cypher MATCH (p:Place) RETURN p```"),
            text("<answer>(visited-object O1)</answer>"),
        ],
        Mode::Agentic,
    );
    let t = &r.transcript;
    let non_assistant: usize = t
        .messages
        .iter()
        .filter(|m| m.category != TokenCategory::Output)
        .map(|m| m.tokens)
        .sum();
    let tool: usize = t
        .messages
        .iter()
        .filter(|m| m.role == Role::Tool)
        .map(|m| m.tokens)
        .sum();
    let generated: usize = t
        .messages
        .iter()
        .filter(|m| m.category == TokenCategory::Output)
        .map(|m| m.tokens)
        .sum();
    assert_eq!(t.input_tokens + t.tool_tokens, non_assistant);
    assert_eq!(t.tool_tokens, tool);
    assert_eq!(t.output_tokens, generated);
    assert!(t.tool_tokens > 0 && t.output_tokens > 0);
}

/// Replays a script and reports usage consistent with the request size.
struct MeteredBackend {
    inner: ScriptedBackend,
    last: Mutex<usize>,
}

impl Backend for MeteredBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let mut c = self.inner.complete(request)?;
        let prompt: usize = request.messages.iter().map(|m| m.text.len()).sum::<usize>() / 3;
        let mut last = self.last.lock().unwrap();
        *last = prompt.max(*last);
        c.usage = Some(Usage {
            prompt_tokens: *last,
            completion_tokens: 7,
        });
        Ok(c)
    }
}

#[test]
fn reported_usage_is_authoritative() {
    let g = graph();
    let spec = PromptSpec::for_graph(Task::Pddl, Mode::Agentic, &g, "Go to object 1.", None, 5);
    let backend = MeteredBackend {
        inner: ScriptedBackend::new(vec![
            tool("MATCH (o:Object) RETURN o"),
            text("<answer>(safe O1)</answer>"),
        ]),
        last: Mutex::new(0),
    };
    let r = run_session(&backend, &g, &spec, &config(Mode::Agentic)).unwrap();
    let t = &r.transcript;
    assert_eq!(t.token_source, TokenSource::Backend);
    assert_eq!(t.output_tokens, 14);
    // last prompt size equals everything sent before the final reply
    let before_final: usize = t.messages[..t.messages.len() - 1].iter().map(|m| m.tokens).sum();
    let sent: usize = t.messages[..t.messages.len() - 1]
        .iter()
        .map(|m| m.text.len())
        .sum::<usize>()
        / 3;
    assert_eq!(before_final, sent);
    assert_eq!(t.input_tokens + t.tool_tokens + t.output_tokens, before_final + 7);
}

fn entry() -> impl Strategy<Value = ScriptEntry> {
    prop_oneof![
        3 => Just(ScriptEntry::ToolCall("MATCH (o:Object) RETURN count(*)".into())),
        1 => Just(ScriptEntry::ToolCall("MATCH (o:Bogus) RETURN o".into())),
        1 => Just(ScriptEntry::Text("<answer>(safe O1)</answer>".into())),
        1 => Just(ScriptEntry::Text("thinking".into())),
        1 => Just(ScriptEntry::TransportError("reset".into())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sessions_terminate_within_bounds(
        entries in prop::collection::vec(entry(), 0..12),
        max_calls in 0usize..7,
        mode in prop_oneof![Just(Mode::Agentic), Just(Mode::Single), Just(Mode::Context)],
    ) {
        let g = graph();
        let spec = PromptSpec::for_graph(Task::Pddl, mode, &g, "x", None, max_calls);
        let cfg = SessionConfig { mode, max_calls, retry: RetryPolicy::immediate(), ..SessionConfig::default() };
        let backend = ScriptedBackend::new(entries);
        let t = run_session(&backend, &g, &spec, &cfg).unwrap().transcript;
        prop_assert!(t.tool_calls <= max_calls.max(usize::from(mode == Mode::Single)));
        prop_assert!(t.backend_calls <= max_calls + 2);
        for (i, m) in t.messages.iter().enumerate() {
            if m.role == Role::Tool {
                let prev = &t.messages[i - 1];
                prop_assert!(prev.role == Role::Assistant && prev.tool_call.is_some());
            }
        }
        if mode == Mode::Single {
            let tools = t.messages.iter().filter(|m| m.role == Role::Tool).count();
            prop_assert!(tools <= 1);
        }
    }
}
