//! Scene graphs as typed property graphs.
//!
//! Four layers (objects, mesh places, places, rooms) joined by downward
//! `CONTAINS` edges and undirected per-layer connectivity edges.

mod graph;
mod load;
mod symbol;
mod validate;

pub use graph::{
    BoundingBox, Direction, EdgeId, EdgeType, GraphBuilder, GraphEdge, GraphNode, Labelspace, NodeId, Point3,
    PropValue, PropertyGraph,
};
pub use load::{load_graph, load_graph_file};
pub use symbol::{Layer, NodeSymbol, SymbolError};
pub use validate::{validate, ValidationReport, Violation, RULE_CONTAINMENT, RULE_LABELSPACE, RULE_ORPHAN};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("malformed scene-graph JSON at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown node symbol {0}")]
    UnknownSymbol(String),
    #[error("i/o error: {0}")]
    Io(String),
}
