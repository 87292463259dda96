use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sgg_core::agent::{Mode, Task};

#[derive(Debug, Parser)]
#[command(name = "sgg", version, about = "Query, ask about and evaluate 3D scene graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a graph and print a summary.
    Ingest {
        graph: PathBuf,
        /// Also run structural validation; violations exit 1.
        #[arg(long)]
        validate: bool,
    },
    /// Run one query, or read queries from stdin when -e is absent.
    Query {
        graph: PathBuf,
        #[arg(short = 'e', long = "execute")]
        execute: Option<String>,
        #[arg(long, default_value_t = sgg_core::query::DEFAULT_MAX_ROWS)]
        max_rows: usize,
    },
    /// Answer a question or translate an instruction with an LLM.
    Ask {
        graph: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        input: String,
        /// Expected answer kind for qa (number, string, list, set, dict, point).
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        run: RunArgs,
        /// Write the session transcript as JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run a dataset through a pipeline and write a report.
    Eval {
        /// Graph files as `id=path`, or a bare path whose file stem is the id.
        #[arg(required = true)]
        graphs: Vec<String>,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        report: PathBuf,
        /// Concurrent sessions.
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        tolerance: ToleranceArgs,
    },
    /// Compare a predicted answer against a gold answer.
    Check {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        gold: String,
        #[arg(long)]
        pred: String,
        #[command(flatten)]
        tolerance: ToleranceArgs,
    },
    /// Print the plain-text serialization used by the in-context baseline.
    Serialize { graph: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `scripted:<path>` or `http`; exactly one.
    #[arg(long = "backend", required = true)]
    pub backends: Vec<String>,
    #[arg(long, default_value = "agentic")]
    pub mode: Mode,
    #[arg(long, default_value_t = 5)]
    pub max_calls: usize,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Absolute tolerance for numbers.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Per-coordinate tolerance for points.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
}
