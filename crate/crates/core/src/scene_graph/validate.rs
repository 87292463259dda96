use std::fmt;

use serde::Serialize;

use super::graph::{EdgeType, PropertyGraph};
use super::symbol::{Layer, NodeSymbol};

pub const RULE_CONTAINMENT: &str = "containment-direction";
pub const RULE_ORPHAN: &str = "orphan-object";
pub const RULE_LABELSPACE: &str = "labelspace";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub symbols: Vec<NodeSymbol>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: &str) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "pass" } else { "fail" };
        writeln!(f, "{verdict}: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  [{}] {}", v.rule, v.message)?;
        }
        Ok(())
    }
}

fn containment_allowed(parent: Layer, child: Layer) -> bool {
    matches!(
        (parent, child),
        (Layer::Room, Layer::MeshPlace)
            | (Layer::Room, Layer::Place)
            | (Layer::MeshPlace, Layer::Object)
            | (Layer::Place, Layer::Object)
    )
}

/// Check containment direction, object parentage and class membership.
pub fn validate(graph: &PropertyGraph) -> ValidationReport {
    let mut violations = Vec::new();

    for edge in graph.edges().iter().filter(|e| e.edge_type == EdgeType::Contains) {
        let (parent, child) = (edge.source.layer(), edge.target.layer());
        if !containment_allowed(parent, child) {
            violations.push(Violation {
                rule: RULE_CONTAINMENT,
                symbols: vec![edge.source, edge.target],
                message: format!("{} ({parent}) cannot contain {} ({child})", edge.source, edge.target),
            });
        }
    }

    for &id in graph.layer_nodes(Layer::Object) {
        if graph.parents(id).is_empty() {
            let symbol = graph.node_at(id).symbol;
            violations.push(Violation {
                rule: RULE_ORPHAN,
                symbols: vec![symbol],
                message: format!("object {symbol} has no containing Place or Mesh Place"),
            });
        }
    }

    for node in graph.nodes() {
        if let Some(class) = &node.class {
            if !graph.labelspace().allows(node.layer(), class) {
                violations.push(Violation {
                    rule: RULE_LABELSPACE,
                    symbols: vec![node.symbol],
                    message: format!(
                        "{} has class `{class}`, which is not in the {} labelspace",
                        node.symbol,
                        node.layer()
                    ),
                });
            }
        }
    }

    ValidationReport { violations }
}
