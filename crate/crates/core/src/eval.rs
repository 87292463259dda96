//! Dataset loading, scoring and batch evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{
    run_session, Backend, HttpBackend, Mode, PromptSpec, ScriptedBackend, Scripts, SessionConfig, SessionOutcome,
    SessionResult, Task,
};
use crate::answer::{parse_sldp, sldp_equal, SldpKind, Tolerance};
use crate::goal::{goals_equivalent, parse_goal, Schemas};
use crate::par;
use crate::scene_graph::PropertyGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCase {
    pub id: String,
    pub task: Task,
    pub graph: String,
    pub input: String,
    pub gold: String,
    /// Expected answer kind; QA only.
    pub kind: Option<SldpKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Io(String),
    #[error("dataset line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("dataset case {case}: {message}")]
    Gold { case: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    id: String,
    task: Task,
    graph: String,
    input: String,
    gold: String,
    #[serde(default)]
    kind: Option<String>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalCase>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

/// One case per non-blank JSONL line. Gold answers must parse under their
/// task's checker; QA cases declare a kind and their gold must have it.
pub fn parse_dataset(text: &str) -> Result<Vec<EvalCase>, EvalError> {
    let schemas = Schemas::default();
    let mut seen = BTreeSet::new();
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCase = serde_json::from_str(line).map_err(|e| EvalError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(EvalError::Line {
                line: line_no,
                message: format!("duplicate case id `{}`", raw.id),
            });
        }
        let gold_err = |message: String| EvalError::Gold {
            case: raw.id.clone(),
            message,
        };
        let kind = match (raw.task, &raw.kind) {
            (Task::Pddl, Some(_)) => return Err(gold_err("`kind` applies to qa cases only".into())),
            (Task::Qa, None) => return Err(gold_err("qa cases need an answer `kind`".into())),
            (Task::Pddl, None) => None,
            (Task::Qa, Some(k)) => Some(k.parse::<SldpKind>().map_err(gold_err)?),
        };
        match raw.task {
            Task::Qa => {
                let value = parse_sldp(&raw.gold).map_err(|e| gold_err(format!("gold answer does not parse: {e}")))?;
                if let Some(k) = kind {
                    if value.kind() != k {
                        return Err(gold_err(format!("gold answer is a {}, declared {k}", value.kind())));
                    }
                }
            }
            Task::Pddl => {
                parse_goal(&raw.gold, &schemas).map_err(|e| gold_err(format!("gold goal does not parse: {e}")))?;
            }
        }
        cases.push(EvalCase {
            id: raw.id,
            task: raw.task,
            graph: raw.graph,
            input: raw.input,
            gold: raw.gold,
            kind,
        });
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClass {
    WrongAnswer,
    ExtractionFailure,
    SessionFailure,
    ParseFailure,
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureClass::WrongAnswer => "wrong-answer",
            FailureClass::ExtractionFailure => "extraction-failure",
            FailureClass::SessionFailure => "session-failure",
            FailureClass::ParseFailure => "parse-failure",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTriple {
    #[serde(rename = "I")]
    pub input: usize,
    #[serde(rename = "T")]
    pub tool: usize,
    #[serde(rename = "O")]
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: String,
    pub task: Task,
    pub graph: String,
    pub success: bool,
    pub predicted: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<FailureClass>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
    pub tokens: TokenTriple,
    pub tool_calls: usize,
}

impl Outcome {
    fn new(case: &EvalCase, predicted: Option<&str>) -> Outcome {
        Outcome {
            id: case.id.clone(),
            task: case.task,
            graph: case.graph.clone(),
            success: false,
            predicted: predicted.map(str::to_string),
            failure: None,
            detail: None,
            tokens: TokenTriple::default(),
            tool_calls: 0,
        }
    }

    fn fail(mut self, class: FailureClass, detail: impl Into<String>) -> Outcome {
        self.success = false;
        self.failure = Some(class);
        self.detail = Some(detail.into());
        self
    }
}

pub fn score_case(case: &EvalCase, predicted: &str) -> Outcome {
    score_case_with(case, predicted, &Tolerance::default())
}

/// Compare a predicted answer with the case's gold. Tokens and tool calls
/// are left at zero.
pub fn score_case_with(case: &EvalCase, predicted: &str, tol: &Tolerance) -> Outcome {
    let out = Outcome::new(case, Some(predicted));
    let verdict = match case.task {
        Task::Qa => {
            let gold = match parse_sldp(&case.gold) {
                Ok(g) => g,
                Err(e) => return out.fail(FailureClass::ParseFailure, format!("gold: {e}")),
            };
            match parse_sldp(predicted) {
                Ok(p) => Ok(sldp_equal(&gold, &p, tol)),
                Err(e) => return out.fail(FailureClass::ParseFailure, e.to_string()),
            }
        }
        Task::Pddl => {
            let schemas = Schemas::default();
            let gold = match parse_goal(&case.gold, &schemas) {
                Ok(g) => g,
                Err(e) => return out.fail(FailureClass::ParseFailure, format!("gold: {e}")),
            };
            match parse_goal(predicted, &schemas) {
                Ok(p) => goals_equivalent(&gold, &p).map_err(|e| e.to_string()),
                Err(e) => return out.fail(FailureClass::ParseFailure, e.to_string()),
            }
        }
    };
    match verdict {
        Ok(true) => Outcome { success: true, ..out },
        Ok(false) => out.fail(FailureClass::WrongAnswer, "not equal to the gold answer"),
        Err(e) => out.fail(FailureClass::WrongAnswer, e),
    }
}

/// Score a finished session, carrying over its token totals.
pub fn score_session(case: &EvalCase, result: &SessionResult, tol: &Tolerance) -> Outcome {
    let t = &result.transcript;
    let mut out = match &t.outcome {
        SessionOutcome::Answer { text } => score_case_with(case, text, tol),
        SessionOutcome::ExtractionFailure { reason } => {
            Outcome::new(case, None).fail(FailureClass::ExtractionFailure, reason.clone())
        }
        SessionOutcome::SessionFailure { reason } => {
            Outcome::new(case, None).fail(FailureClass::SessionFailure, reason.clone())
        }
    };
    out.tokens = TokenTriple {
        input: t.input_tokens,
        tool: t.tool_tokens,
        output: t.output_tokens,
    };
    out.tool_calls = t.tool_calls;
    out
}

/// Supplies the backend each case talks to.
pub trait BackendSource: Sync {
    fn backend_for<'s>(&'s self, case: &EvalCase) -> Result<Box<dyn Backend + 's>, String>;
}

impl BackendSource for Scripts {
    fn backend_for<'s>(&'s self, case: &EvalCase) -> Result<Box<dyn Backend + 's>, String> {
        let entries = self
            .for_case(&case.id)
            .ok_or_else(|| format!("no script for case `{}`", case.id))?;
        Ok(Box::new(ScriptedBackend::new(entries.to_vec())))
    }
}

impl BackendSource for HttpBackend {
    fn backend_for<'s>(&'s self, _case: &EvalCase) -> Result<Box<dyn Backend + 's>, String> {
        Ok(Box::new(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub mode: Mode,
    pub max_calls: usize,
    /// Concurrent sessions; 1 runs cases in order on the calling thread.
    pub workers: usize,
    pub tolerance: Tolerance,
    pub session: SessionConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: Mode::Agentic,
            max_calls: 5,
            workers: 4,
            tolerance: Tolerance::default(),
            session: SessionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub task: Task,
    pub graph: String,
    pub mode: Mode,
    pub cases: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean token triple over the group's cases.
    pub mean_input: f64,
    pub mean_tool: f64,
    pub mean_output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: Mode,
    pub max_calls: usize,
    pub cases: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub groups: Vec<GroupSummary>,
    pub outcomes: Vec<Outcome>,
}

fn rate(successes: usize, cases: usize) -> f64 {
    if cases == 0 {
        0.0
    } else {
        successes as f64 / cases as f64
    }
}

impl Report {
    /// Aggregate outcomes; input order does not matter.
    pub fn from_outcomes(mode: Mode, max_calls: usize, mut outcomes: Vec<Outcome>) -> Report {
        outcomes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_group: BTreeMap<(String, String), Vec<&Outcome>> = BTreeMap::new();
        for o in &outcomes {
            by_group
                .entry((o.task.to_string(), o.graph.clone()))
                .or_default()
                .push(o);
        }
        let groups = by_group
            .into_values()
            .map(|os| {
                let n = os.len();
                let ok = os.iter().filter(|o| o.success).count();
                let mean =
                    |f: fn(&TokenTriple) -> usize| os.iter().map(|o| f(&o.tokens)).sum::<usize>() as f64 / n as f64;
                GroupSummary {
                    task: os[0].task,
                    graph: os[0].graph.clone(),
                    mode,
                    cases: n,
                    successes: ok,
                    success_rate: rate(ok, n),
                    mean_input: mean(|t| t.input),
                    mean_tool: mean(|t| t.tool),
                    mean_output: mean(|t| t.output),
                }
            })
            .collect();
        let successes = outcomes.iter().filter(|o| o.success).count();
        Report {
            mode,
            max_calls,
            cases: outcomes.len(),
            successes,
            success_rate: rate(successes, outcomes.len()),
            groups,
            outcomes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned summary table, one row per (task, graph, mode).
    pub fn table(&self) -> String {
        let header = ["task", "graph", "mode", "cases", "success", "I", "T", "O"];
        let mut rows: Vec<[String; 8]> = vec![header.map(String::from)];
        for g in &self.groups {
            rows.push([
                g.task.to_string(),
                g.graph.clone(),
                g.mode.to_string(),
                g.cases.to_string(),
                format!("{:.3}", g.success_rate),
                format!("{:.1}", g.mean_input),
                format!("{:.1}", g.mean_tool),
                format!("{:.1}", g.mean_output),
            ]);
        }
        let widths: Vec<usize> = (0..8)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    if c < 3 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

/// Run every case through `config.mode`. Missing graphs and backends are
/// reported before any session starts.
pub fn run_eval(
    graphs: &BTreeMap<String, PropertyGraph>,
    cases: &[EvalCase],
    config: &EvalConfig,
    backends: &dyn BackendSource,
) -> Result<Report, EvalError> {
    let mut work = Vec::with_capacity(cases.len());
    for case in cases {
        let graph = graphs
            .get(&case.graph)
            .ok_or_else(|| EvalError::Config(format!("case `{}` refers to unknown graph `{}`", case.id, case.graph)))?;
        let backend = backends.backend_for(case).map_err(EvalError::Config)?;
        work.push((case, graph, backend));
    }
    let session = SessionConfig {
        mode: config.mode,
        max_calls: config.max_calls,
        ..config.session.clone()
    };
    let run = |(case, graph, backend): &(&EvalCase, &PropertyGraph, Box<dyn Backend + '_>)| {
        let spec = PromptSpec::for_graph(case.task, config.mode, graph, &case.input, case.kind, config.max_calls);
        run_session(backend.as_ref(), graph, &spec, &session)
            .map(|r| score_session(case, &r, &config.tolerance))
            .map_err(|e| EvalError::Config(format!("case `{}`: {e}", case.id)))
    };
    let results = par::with_workers(config.workers, |mode| par::map(mode, &work, run));
    let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Report::from_outcomes(config.mode, config.max_calls, outcomes))
}
