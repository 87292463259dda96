use std::path::Path;

use serde::de::{self, Deserializer};
use serde::Deserialize;
use serde_json::value::RawValue;

use super::graph::{BoundingBox, EdgeType, GraphNode, Labelspace, Point3, PropertyGraph};
use super::symbol::{Layer, NodeSymbol};
use super::GraphError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    labelspace: Option<Labelspace>,
    #[serde(default, alias = "layers")]
    nodes: NodeLists,
    #[serde(default)]
    edges: EdgeLists,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NodeLists {
    #[serde(default)]
    objects: Vec<ClassedRecord>,
    #[serde(default)]
    mesh_places: Vec<ClassedRecord>,
    #[serde(default)]
    places: Vec<PlaceRecord>,
    #[serde(default)]
    rooms: Vec<ClassedRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassedRecord {
    id: String,
    class: String,
    center: Center,
    #[serde(default)]
    bbox: Option<BoundingBox>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaceRecord {
    id: String,
    center: Center,
    #[serde(default)]
    bbox: Option<BoundingBox>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EdgeLists {
    #[serde(default)]
    contains: Vec<[String; 2]>,
    #[serde(default)]
    object_connected: Vec<[String; 2]>,
    #[serde(default)]
    place_connected: Vec<[String; 2]>,
    #[serde(default)]
    mesh_place_connected: Vec<[String; 2]>,
    #[serde(default)]
    room_connected: Vec<[String; 2]>,
}

/// `[x, y, z]` with each coordinate's printed form retained.
struct Center {
    point: Point3,
    text: [String; 3],
}

impl<'de> Deserialize<'de> for Center {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: Box<RawValue> = Deserialize::deserialize(deserializer)?;
        parse_center(raw.get()).map_err(de::Error::custom)
    }
}

fn parse_center(raw: &str) -> Result<Center, String> {
    let bad = || format!("center must be an array of three numbers, got {raw}");
    let inner = raw
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(bad)?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut coords = [0.0; 3];
    for (slot, part) in coords.iter_mut().zip(&parts) {
        let lead = part.bytes().next().ok_or_else(bad)?;
        if !(lead == b'-' || lead.is_ascii_digit()) {
            return Err(bad());
        }
        *slot = part.parse::<f64>().map_err(|_| bad())?;
        if !slot.is_finite() {
            return Err(format!("center coordinate {part} is not finite"));
        }
    }
    Ok(Center {
        point: Point3::new(coords[0], coords[1], coords[2]),
        text: [parts[0].to_string(), parts[1].to_string(), parts[2].to_string()],
    })
}

/// Parse and index a scene-graph JSON document.
pub fn load_graph(document: &str) -> Result<PropertyGraph, GraphError> {
    let doc: Document = serde_json::from_str(document).map_err(|e| classify(document, e))?;
    let mut builder = PropertyGraph::builder(doc.labelspace.unwrap_or_default());

    let classed = [
        (Layer::Object, doc.nodes.objects),
        (Layer::MeshPlace, doc.nodes.mesh_places),
        (Layer::Room, doc.nodes.rooms),
    ];
    for (layer, records) in classed {
        for rec in records {
            let symbol = layer_symbol(&rec.id, layer)?;
            builder.add_node(make_node(symbol, Some(rec.class), rec.center, rec.bbox))?;
        }
    }
    for rec in doc.nodes.places {
        let symbol = layer_symbol(&rec.id, Layer::Place)?;
        builder.add_node(make_node(symbol, None, rec.center, rec.bbox))?;
    }

    let lists = [
        (EdgeType::Contains, doc.edges.contains),
        (EdgeType::ObjectConnected, doc.edges.object_connected),
        (EdgeType::PlaceConnected, doc.edges.place_connected),
        (EdgeType::MeshPlaceConnected, doc.edges.mesh_place_connected),
        (EdgeType::RoomConnected, doc.edges.room_connected),
    ];
    for (edge_type, pairs) in lists {
        for [source, target] in pairs {
            let source = edge_symbol(&source, edge_type)?;
            let target = edge_symbol(&target, edge_type)?;
            builder.add_edge(source, target, edge_type)?;
        }
    }
    Ok(builder.build())
}

pub fn load_graph_file(path: impl AsRef<Path>) -> Result<PropertyGraph, GraphError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))?;
    load_graph(&text)
}

fn make_node(symbol: NodeSymbol, class: Option<String>, center: Center, bbox: Option<BoundingBox>) -> GraphNode {
    let mut node = GraphNode::new(symbol, class, center.point);
    node.center_text = Some(center.text);
    node.bbox = bbox;
    node
}

fn layer_symbol(id: &str, layer: Layer) -> Result<NodeSymbol, GraphError> {
    let symbol: NodeSymbol = id.parse().map_err(|e| GraphError::Schema(format!("{e}")))?;
    if symbol.layer() != layer {
        return Err(GraphError::Schema(format!(
            "node {id} is listed under {layer} but its prefix denotes {}",
            symbol.layer()
        )));
    }
    Ok(symbol)
}

fn edge_symbol(id: &str, edge_type: EdgeType) -> Result<NodeSymbol, GraphError> {
    id.parse()
        .map_err(|e| GraphError::Schema(format!("{edge_type} edge endpoint: {e}")))
}

fn classify(document: &str, err: serde_json::Error) -> GraphError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Data => GraphError::Schema(err.to_string()),
        Category::Io => GraphError::Io(err.to_string()),
        Category::Syntax | Category::Eof => {
            let offset = byte_offset(document, err.line(), err.column());
            GraphError::Parse {
                offset,
                line: err.line(),
                column: err.column(),
                message: err.to_string(),
            }
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}
