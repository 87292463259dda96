use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::Path;

use sgg_core::agent::{
    load_scripts, run_session, Backend, HttpBackend, HttpConfig, PromptSpec, ScriptedBackend, Scripts, SessionConfig,
    SessionOutcome, Task,
};
use sgg_core::answer::{parse_sldp, sldp_equal, SldpKind, Tolerance};
use sgg_core::baseline::{serialize_graph, SerializationConfig};
use sgg_core::eval::{load_dataset, run_eval, BackendSource, EvalConfig};
use sgg_core::goal::{goals_equivalent, parse_goal, Schemas};
use sgg_core::query::{execute_mut, parse_query, render_result, Limits};
use sgg_core::scene_graph::{load_graph_file, validate, Layer, PropertyGraph};

use crate::args::{Command, RunArgs, ToleranceArgs};

/// Failure reported as `error[kind]: message` with the given exit status.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub status: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError {
            kind: "usage",
            message: message.into(),
            status: 2,
        }
    }

    fn failure(kind: &'static str, message: impl fmt::Display) -> CliError {
        CliError {
            kind,
            message: message.to_string(),
            status: 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keep the first line machine-readable
        write!(f, "error[{}]: {}", self.kind, self.message.replace('\n', " "))
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { graph, validate } => ingest(&graph, validate, out),
        Command::Query {
            graph,
            execute,
            max_rows,
        } => query(&graph, execute.as_deref(), max_rows, out),
        Command::Ask {
            graph,
            task,
            input,
            kind,
            run,
            transcript,
        } => ask(&graph, task, &input, kind.as_deref(), &run, transcript.as_deref(), out),
        Command::Eval {
            graphs,
            dataset,
            run,
            report,
            workers,
            tolerance,
        } => eval(&graphs, &dataset, &run, &report, workers, &tolerance, out),
        Command::Check {
            task,
            gold,
            pred,
            tolerance,
        } => check(task, &gold, &pred, &tolerance, out),
        Command::Serialize { graph } => {
            let g = load(&graph)?;
            write(out, &serialize_graph(&g, &SerializationConfig::default()))
        }
    }
}

fn write(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::failure("io", e))
}

fn load(path: &Path) -> Result<PropertyGraph> {
    load_graph_file(path).map_err(|e| CliError::failure("graph", e))
}

fn ingest(path: &Path, check: bool, out: &mut dyn Write) -> Result<()> {
    let g = load(path)?;
    let mut text = String::new();
    for (layer, name) in [
        (Layer::Object, "objects"),
        (Layer::MeshPlace, "mesh places"),
        (Layer::Place, "places"),
        (Layer::Room, "rooms"),
    ] {
        text += &format!("{name}: {}\n", g.layer_nodes(layer).len());
    }
    text += &format!("edges: {}\n", g.edges().len());
    if !check {
        return write(out, &text);
    }
    let report = validate(&g);
    text += &report.to_string();
    write(out, &text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::failure(
            "validation",
            format!("{} violation(s)", report.violations.len()),
        ))
    }
}

/// Shared by `-e` and the REPL so both print the same text.
fn run_query_text(graph: &mut PropertyGraph, text: &str, max_rows: usize) -> std::result::Result<String, String> {
    let q = parse_query(text).map_err(|e| e.to_string())?;
    let table = execute_mut(graph, &q, &Limits::default()).map_err(|e| e.to_string())?;
    Ok(render_result(&table, max_rows))
}

fn query(path: &Path, execute: Option<&str>, max_rows: usize, out: &mut dyn Write) -> Result<()> {
    let mut g = load(path)?;
    if let Some(text) = execute {
        let rendered = run_query_text(&mut g, text, max_rows).map_err(|e| CliError::failure("query", e))?;
        return write(out, &format!("{rendered}\n"));
    }
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let prompt = || {
        if interactive {
            eprint!("sgg> ");
        }
    };
    prompt();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| CliError::failure("io", e))?;
        let text = line.trim();
        if text.is_empty() {
            prompt();
            continue;
        }
        if matches!(text, ":q" | ":quit" | "exit" | "quit") {
            break;
        }
        let shown = run_query_text(&mut g, text, max_rows).unwrap_or_else(|e| e);
        write(out, &format!("{shown}\n"))?;
        prompt();
    }
    Ok(())
}

enum BackendChoice {
    Scripted(Scripts),
    Http(HttpBackend),
}

fn backend_choice(run: &RunArgs) -> Result<BackendChoice> {
    let [choice] = run.backends.as_slice() else {
        return Err(CliError::usage(format!(
            "exactly one --backend is required, got {}",
            run.backends.len()
        )));
    };
    if choice == "http" {
        let config = HttpConfig::from_env().map_err(|e| CliError::failure("config", e))?;
        return Ok(BackendChoice::Http(HttpBackend::new(config)));
    }
    match choice.strip_prefix("scripted:") {
        Some(path) if !path.is_empty() => load_scripts(path)
            .map(BackendChoice::Scripted)
            .map_err(|e| CliError::failure("config", e)),
        _ => Err(CliError::usage(format!(
            "unknown backend `{choice}` (expected scripted:<path> or http)"
        ))),
    }
}

fn session_config(run: &RunArgs) -> SessionConfig {
    SessionConfig {
        mode: run.mode,
        max_calls: run.max_calls,
        ..SessionConfig::default()
    }
}

fn ask(
    path: &Path,
    task: Task,
    input: &str,
    kind: Option<&str>,
    run: &RunArgs,
    transcript: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let kind = match (task, kind) {
        (Task::Qa, Some(k)) => Some(k.parse::<SldpKind>().map_err(CliError::usage)?),
        (Task::Qa, None) => return Err(CliError::usage("--kind is required for --task qa")),
        (Task::Pddl, Some(_)) => return Err(CliError::usage("--kind applies to --task qa only")),
        (Task::Pddl, None) => None,
    };
    let choice = backend_choice(run)?;
    let g = load(path)?;
    let backend: Box<dyn Backend + '_> = match &choice {
        BackendChoice::Http(h) => Box::new(h),
        BackendChoice::Scripted(scripts) => {
            let entries = match scripts {
                Scripts::Single(entries) => entries.clone(),
                Scripts::PerCase(map) => map
                    .get("ask")
                    .cloned()
                    .ok_or_else(|| CliError::failure("config", "per-case script file has no `ask` entry"))?,
            };
            Box::new(ScriptedBackend::new(entries))
        }
    };
    let spec = PromptSpec::for_graph(task, run.mode, &g, input, kind, run.max_calls);
    let result =
        run_session(backend.as_ref(), &g, &spec, &session_config(run)).map_err(|e| CliError::failure("config", e))?;
    if let Some(p) = transcript {
        std::fs::write(p, result.transcript.to_json() + "\n")
            .map_err(|e| CliError::failure("io", format!("{}: {e}", p.display())))?;
    }
    match &result.transcript.outcome {
        SessionOutcome::Answer { text } => write(out, &format!("{text}\n")),
        SessionOutcome::ExtractionFailure { reason } => Err(CliError::failure("extraction", reason)),
        SessionOutcome::SessionFailure { reason } => Err(CliError::failure("session", reason)),
    }
}

impl BackendSource for BackendChoice {
    fn backend_for<'s>(
        &'s self,
        case: &sgg_core::eval::EvalCase,
    ) -> std::result::Result<Box<dyn Backend + 's>, String> {
        match self {
            BackendChoice::Scripted(s) => s.backend_for(case),
            BackendChoice::Http(h) => h.backend_for(case),
        }
    }
}

fn graph_arg(arg: &str) -> Result<(String, &Path)> {
    if let Some((id, path)) = arg.split_once('=') {
        if id.is_empty() || path.is_empty() {
            return Err(CliError::usage(format!("malformed graph argument `{arg}`")));
        }
        return Ok((id.to_string(), Path::new(path)));
    }
    let path = Path::new(arg);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::usage(format!("cannot derive a graph id from `{arg}`")))?;
    Ok((stem.to_string(), path))
}

fn tolerance(t: &ToleranceArgs) -> Result<Tolerance> {
    if !(t.epsilon >= 0.0 && t.delta >= 0.0) {
        return Err(CliError::usage("tolerances must be non-negative"));
    }
    Ok(Tolerance {
        epsilon: t.epsilon,
        delta: t.delta,
    })
}

fn eval(
    graph_args: &[String],
    dataset: &Path,
    run: &RunArgs,
    report_path: &Path,
    workers: usize,
    tol: &ToleranceArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let tolerance = tolerance(tol)?;
    let mut specs = Vec::new();
    for arg in graph_args {
        specs.push(graph_arg(arg)?);
    }
    let choice = backend_choice(run)?;
    let mut graphs = BTreeMap::new();
    for (id, path) in specs {
        let g = load(path)?;
        if graphs.insert(id.clone(), g).is_some() {
            return Err(CliError::usage(format!("graph id `{id}` given twice")));
        }
    }
    let cases = load_dataset(dataset).map_err(|e| CliError::failure("dataset", e))?;
    let config = EvalConfig {
        mode: run.mode,
        max_calls: run.max_calls,
        workers: workers.max(1),
        tolerance,
        session: session_config(run),
    };
    let report = run_eval(&graphs, &cases, &config, &choice).map_err(|e| CliError::failure("config", e))?;
    std::fs::write(report_path, report.to_json() + "\n")
        .map_err(|e| CliError::failure("io", format!("{}: {e}", report_path.display())))?;
    write(
        out,
        &format!(
            "{}overall: {}/{} = {:.3}\n",
            report.table(),
            report.successes,
            report.cases,
            report.success_rate
        ),
    )
}

fn check(task: Task, gold: &str, pred: &str, tol: &ToleranceArgs, out: &mut dyn Write) -> Result<()> {
    let equal = match task {
        Task::Qa => {
            let tolerance = tolerance(tol)?;
            let g = parse_sldp(gold).map_err(|e| CliError::failure("parse", format!("gold: {e}")))?;
            let p = parse_sldp(pred).map_err(|e| CliError::failure("parse", format!("pred: {e}")))?;
            sldp_equal(&g, &p, &tolerance)
        }
        Task::Pddl => {
            let schemas = Schemas::default();
            let g = parse_goal(gold, &schemas).map_err(|e| CliError::failure("parse", format!("gold: {e}")))?;
            let p = parse_goal(pred, &schemas).map_err(|e| CliError::failure("parse", format!("pred: {e}")))?;
            goals_equivalent(&g, &p).map_err(|e| CliError::failure("goal", e))?
        }
    };
    if equal {
        write(out, "equivalent\n")
    } else {
        write(out, "not equivalent\n")?;
        Err(CliError::failure("mismatch", "prediction is not equivalent to gold"))
    }
}
