//! Cypher-subset query language over a [`PropertyGraph`].

mod ast;
mod error;
mod exec;
mod lexer;
mod parser;
mod render;
mod value;

pub use ast::*;
pub use error::{QueryError, QueryErrorKind, Span};
pub use exec::{execute, execute_mut, Limits, NodeSnapshot, ResultTable};
pub use parser::parse_query;
pub use render::{format_float, format_point, render_result, DEFAULT_MAX_ROWS};
pub use value::{Value, ValueKey};

use crate::scene_graph::PropertyGraph;

/// Parse and run `text`, applying any SET to `graph`.
pub fn run_query(graph: &mut PropertyGraph, text: &str, limits: &Limits) -> Result<ResultTable, QueryError> {
    let q = parse_query(text)?;
    execute_mut(graph, &q, limits)
}
