//! Plain-text scene graph listing for the context-window pipeline.

use std::fmt::Write;

use crate::scene_graph::{Layer, NodeId, PropertyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Id,
    Type,
    Pos,
    ParentPlaces,
    ParentRooms,
    Siblings,
}

/// Fields per section; `None` drops the section entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializationConfig {
    pub objects: Option<Vec<Field>>,
    pub places: Option<Vec<Field>>,
    pub rooms: Option<Vec<Field>>,
}

impl Default for SerializationConfig {
    fn default() -> Self {
        use Field::*;
        SerializationConfig {
            objects: Some(vec![Id, Type, Pos, ParentPlaces]),
            places: Some(vec![Id, Siblings, ParentRooms]),
            rooms: Some(vec![Id, Type, Pos, Siblings]),
        }
    }
}

pub fn serialize_graph(graph: &PropertyGraph, config: &SerializationConfig) -> String {
    let mut out = String::new();
    let sections: [(&str, &Option<Vec<Field>>, &[Layer]); 3] = [
        ("Objects:", &config.objects, &[Layer::Object]),
        ("Places:", &config.places, &[Layer::MeshPlace, Layer::Place]),
        ("Rooms:", &config.rooms, &[Layer::Room]),
    ];
    for (header, fields, layers) in sections {
        let Some(fields) = fields else { continue };
        out.push_str(header);
        out.push('\n');
        for layer in layers {
            for &id in graph.layer_nodes(*layer) {
                let parts: Vec<String> = fields.iter().map(|f| field(graph, id, *f)).collect();
                let _ = writeln!(out, "- ({})", parts.join(", "));
            }
        }
    }
    out
}

fn field(graph: &PropertyGraph, id: NodeId, f: Field) -> String {
    let node = graph.node_at(id);
    match f {
        Field::Id => format!("id={}", node.symbol),
        Field::Type => format!("type={}", node.class.as_deref().unwrap_or("none")),
        Field::Pos => format!("pos=({})", node.center_printed().join(",")),
        Field::ParentPlaces => {
            let ids = graph
                .parents(id)
                .into_iter()
                .filter(|p| matches!(graph.node_at(*p).layer(), Layer::Place | Layer::MeshPlace));
            format!("parent_places={}", id_set(graph, ids))
        }
        Field::ParentRooms => {
            let ids = graph
                .parents(id)
                .into_iter()
                .filter(|p| graph.node_at(*p).layer() == Layer::Room);
            format!("parent_rooms={}", id_set(graph, ids))
        }
        Field::Siblings => {
            let sibs = graph.siblings(id);
            if sibs.is_empty() && node.layer() == Layer::Room {
                "siblings=none".to_string()
            } else {
                format!("siblings={}", id_set(graph, sibs.into_iter()))
            }
        }
    }
}

fn id_set(graph: &PropertyGraph, ids: impl Iterator<Item = NodeId>) -> String {
    let quoted: Vec<String> = ids.map(|i| format!("'{}'", graph.node_at(i).symbol)).collect();
    format!("{{{}}}", quoted.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::{GraphNode, Labelspace, NodeSymbol, Point3};

    #[test]
    fn empty_graph_has_bare_headers() {
        let g = PropertyGraph::builder(Labelspace::default()).build();
        assert_eq!(
            serialize_graph(&g, &SerializationConfig::default()),
            "Objects:\nPlaces:\nRooms:\n"
        );
    }

    #[test]
    fn orphan_object_renders_empty_set() {
        let mut b = PropertyGraph::builder(Labelspace::default());
        b.add_node(GraphNode::new(
            NodeSymbol::new(Layer::Object, 1),
            Some("vehicle".into()),
            Point3::new(1.5, -2.0, 0.25),
        ))
        .unwrap();
        let text = serialize_graph(&b.build(), &SerializationConfig::default());
        assert_eq!(
            text,
            "Objects:\n- (id=O1, type=vehicle, pos=(1.5,-2,0.25), parent_places={})\nPlaces:\nRooms:\n"
        );
    }

    #[test]
    fn sections_and_fields_are_selectable() {
        let g = PropertyGraph::builder(Labelspace::default()).build();
        let cfg = SerializationConfig {
            objects: None,
            places: None,
            rooms: Some(vec![Field::Id]),
        };
        assert_eq!(serialize_graph(&g, &cfg), "Rooms:\n");
    }
}
