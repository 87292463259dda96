//! Grounding natural language in 3D scene graphs.

pub mod agent;
pub mod answer;
pub mod baseline;
pub mod eval;
pub mod goal;
pub mod par;
pub mod query;
pub mod scene_graph;
pub mod synthetic;
