use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::symbol::{Layer, NodeSymbol};
use super::GraphError;

/// A 3D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Value of a property added to a node after load.
#[derive(Debug, Clone, PartialEq)]
pub enum PropValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Point(Point3),
    List(Vec<PropValue>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub symbol: NodeSymbol,
    pub class: Option<String>,
    pub center: Point3,
    pub bbox: Option<BoundingBox>,
    /// Coordinates as printed in the source document, kept for text serialization.
    pub(crate) center_text: Option<[String; 3]>,
    pub(crate) extra: BTreeMap<String, PropValue>,
}

impl GraphNode {
    pub fn new(symbol: NodeSymbol, class: Option<String>, center: Point3) -> Self {
        GraphNode {
            symbol,
            class,
            center,
            bbox: None,
            center_text: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn layer(&self) -> Layer {
        self.symbol.layer()
    }

    /// Coordinates rendered with the precision they were loaded with.
    pub fn center_printed(&self) -> [String; 3] {
        match &self.center_text {
            Some(text) => text.clone(),
            None => self.center.coords().map(|c| c.to_string()),
        }
    }

    pub fn extra_property(&self, key: &str) -> Option<&PropValue> {
        self.extra.get(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    #[serde(rename = "CONTAINS")]
    Contains,
    #[serde(rename = "OBJECT_CONNECTED")]
    ObjectConnected,
    #[serde(rename = "PLACE_CONNECTED")]
    PlaceConnected,
    #[serde(rename = "MESH_PLACE_CONNECTED")]
    MeshPlaceConnected,
    #[serde(rename = "ROOM_CONNECTED")]
    RoomConnected,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::Contains,
        EdgeType::ObjectConnected,
        EdgeType::PlaceConnected,
        EdgeType::MeshPlaceConnected,
        EdgeType::RoomConnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Contains => "CONTAINS",
            EdgeType::ObjectConnected => "OBJECT_CONNECTED",
            EdgeType::PlaceConnected => "PLACE_CONNECTED",
            EdgeType::MeshPlaceConnected => "MESH_PLACE_CONNECTED",
            EdgeType::RoomConnected => "ROOM_CONNECTED",
        }
    }

    pub fn from_name(name: &str) -> Option<EdgeType> {
        EdgeType::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Layer joined by a connectivity edge; `None` for containment.
    pub fn connected_layer(self) -> Option<Layer> {
        match self {
            EdgeType::Contains => None,
            EdgeType::ObjectConnected => Some(Layer::Object),
            EdgeType::PlaceConnected => Some(Layer::Place),
            EdgeType::MeshPlaceConnected => Some(Layer::MeshPlace),
            EdgeType::RoomConnected => Some(Layer::Room),
        }
    }

    pub fn is_undirected(self) -> bool {
        self.connected_layer().is_some()
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Out,
    In,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphEdge {
    pub source: NodeSymbol,
    pub target: NodeSymbol,
    pub edge_type: EdgeType,
}

/// Per-layer permitted class strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labelspace {
    #[serde(default = "default_object_labels")]
    pub objects: Vec<String>,
    #[serde(default = "default_room_labels")]
    pub rooms: Vec<String>,
    #[serde(default = "default_mesh_place_labels")]
    pub mesh_places: Vec<String>,
}

const OBJECT_LABELS: &str = "tree vehicle signal rock fence boat sign door pole rail window flower bed box storage \
     barrel bag basket seating flag decor light appliance trash bicycle food clothes";
const ROOM_LABELS: &str = "road field shelter indoor stairs sidewalk path boundary shore ground dock parking footing";
const MESH_PLACE_LABELS: &str =
    "water ground grass sand sidewalk dock path hill bridge wall floor stairs structure surface flora";

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

fn default_object_labels() -> Vec<String> {
    words(OBJECT_LABELS)
}

fn default_room_labels() -> Vec<String> {
    words(ROOM_LABELS)
}

fn default_mesh_place_labels() -> Vec<String> {
    words(MESH_PLACE_LABELS)
}

impl Default for Labelspace {
    fn default() -> Self {
        Labelspace {
            objects: default_object_labels(),
            rooms: default_room_labels(),
            mesh_places: default_mesh_place_labels(),
        }
    }
}

impl Labelspace {
    pub fn labels(&self, layer: Layer) -> &[String] {
        match layer {
            Layer::Object => &self.objects,
            Layer::MeshPlace => &self.mesh_places,
            Layer::Room => &self.rooms,
            Layer::Place => &[],
        }
    }

    pub fn allows(&self, layer: Layer, class: &str) -> bool {
        self.labels(layer).iter().any(|l| l == class)
    }
}

/// In-memory scene graph with symbol and adjacency indexes.
///
/// Nodes are stored in ascending symbol order, so `NodeId` order and symbol
/// order coincide. The graph is immutable apart from property updates.
#[derive(Debug, Clone)]
pub struct PropertyGraph {
    nodes: Vec<GraphNode>,
    index: HashMap<NodeSymbol, NodeId>,
    by_layer: [Vec<NodeId>; 4],
    edges: Vec<GraphEdge>,
    ends: Vec<(NodeId, NodeId)>,
    // (neighbor, edge) pairs sorted by neighbor
    out_adj: Vec<Vec<(NodeId, EdgeId)>>,
    in_adj: Vec<Vec<(NodeId, EdgeId)>>,
    labelspace: Labelspace,
    extra_keys: BTreeSet<String>,
}

impl Default for PropertyGraph {
    fn default() -> Self {
        GraphBuilder::new(Labelspace::default()).build()
    }
}

impl PropertyGraph {
    pub fn builder(labelspace: Labelspace) -> GraphBuilder {
        GraphBuilder::new(labelspace)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labelspace(&self) -> &Labelspace {
        &self.labelspace
    }

    /// Exact, case-sensitive lookup.
    pub fn node(&self, symbol: NodeSymbol) -> Option<&GraphNode> {
        self.index.get(&symbol).map(|id| &self.nodes[id.index()])
    }

    /// Lookup from text; anything that is not a well-formed symbol is absent.
    pub fn node_by_text(&self, text: &str) -> Option<&GraphNode> {
        text.parse().ok().and_then(|s| self.node(s))
    }

    pub fn id_of(&self, symbol: NodeSymbol) -> Option<NodeId> {
        self.index.get(&symbol).copied()
    }

    pub fn node_at(&self, id: NodeId) -> &GraphNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn layer_nodes(&self, layer: Layer) -> &[NodeId] {
        &self.by_layer[layer.rank()]
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge_at(&self, id: EdgeId) -> &GraphEdge {
        &self.edges[id.index()]
    }

    pub fn edge_ends(&self, id: EdgeId) -> (NodeId, NodeId) {
        self.ends[id.index()]
    }

    /// Property keys added through updates, beyond nodeSymbol/class/center.
    pub fn extra_keys(&self) -> &BTreeSet<String> {
        &self.extra_keys
    }

    /// Edges incident to `node` that a pattern step of the given type and
    /// direction may traverse, paired with the node on the other end.
    ///
    /// Connectivity edges are undirected, so every direction matches them.
    /// The result is ordered by neighbor, then edge.
    pub fn steps(&self, node: NodeId, edge_type: Option<EdgeType>, dir: Direction) -> Vec<(NodeId, EdgeId)> {
        let type_ok = |e: EdgeId| edge_type.is_none_or(|t| self.edges[e.index()].edge_type == t);
        let mut out: Vec<(NodeId, EdgeId)> = Vec::new();
        for &(nb, e) in &self.out_adj[node.index()] {
            let undirected = self.edges[e.index()].edge_type.is_undirected();
            if type_ok(e) && (undirected || dir != Direction::In) {
                out.push((nb, e));
            }
        }
        for &(nb, e) in &self.in_adj[node.index()] {
            let undirected = self.edges[e.index()].edge_type.is_undirected();
            if type_ok(e) && (undirected || dir != Direction::Out) {
                out.push((nb, e));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Neighbors of `symbol` over one edge type, ascending and deduplicated.
    pub fn edges_from(
        &self,
        symbol: NodeSymbol,
        edge_type: EdgeType,
        dir: Direction,
    ) -> Result<Vec<NodeSymbol>, GraphError> {
        let id = self
            .id_of(symbol)
            .ok_or_else(|| GraphError::UnknownSymbol(symbol.to_string()))?;
        let mut out: Vec<NodeSymbol> = self
            .steps(id, Some(edge_type), dir)
            .into_iter()
            .map(|(nb, _)| self.nodes[nb.index()].symbol)
            .collect();
        out.dedup();
        Ok(out)
    }

    /// CONTAINS parents of a node, ascending.
    pub fn parents(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.in_adj[id.index()]
            .iter()
            .filter(|(_, e)| self.edges[e.index()].edge_type == EdgeType::Contains)
            .map(|(nb, _)| *nb)
            .collect();
        out.dedup();
        out
    }

    /// Neighbors over the node's own connectivity edge type, ascending.
    pub fn siblings(&self, id: NodeId) -> Vec<NodeId> {
        let Some(ty) = connected_type_for(self.nodes[id.index()].layer()) else {
            return Vec::new();
        };
        let mut out: Vec<NodeId> = self
            .steps(id, Some(ty), Direction::Either)
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        out.dedup();
        out
    }

    pub(crate) fn set_class(&mut self, id: NodeId, class: Option<String>) {
        self.nodes[id.index()].class = class;
    }

    pub(crate) fn set_center(&mut self, id: NodeId, center: Point3) {
        let node = &mut self.nodes[id.index()];
        node.center = center;
        node.center_text = None;
    }

    pub(crate) fn set_extra(&mut self, id: NodeId, key: &str, value: Option<PropValue>) {
        let node = &mut self.nodes[id.index()];
        match value {
            Some(v) => {
                node.extra.insert(key.to_string(), v);
                self.extra_keys.insert(key.to_string());
            }
            None => {
                node.extra.remove(key);
            }
        }
    }
}

pub(crate) fn connected_type_for(layer: Layer) -> Option<EdgeType> {
    EdgeType::ALL.into_iter().find(|t| t.connected_layer() == Some(layer))
}

/// Incremental constructor enforcing the load-time invariants.
#[derive(Debug)]
pub struct GraphBuilder {
    nodes: BTreeMap<NodeSymbol, GraphNode>,
    edges: BTreeSet<GraphEdge>,
    labelspace: Labelspace,
}

impl GraphBuilder {
    pub fn new(labelspace: Labelspace) -> Self {
        GraphBuilder {
            nodes: BTreeMap::new(),
            edges: BTreeSet::new(),
            labelspace,
        }
    }

    pub fn add_node(&mut self, node: GraphNode) -> Result<(), GraphError> {
        if !node.center.is_finite() {
            return Err(GraphError::Schema(format!(
                "node {} has a non-finite center",
                node.symbol
            )));
        }
        if node.layer().has_class() != node.class.is_some() {
            let msg = if node.layer().has_class() {
                format!("{} node {} is missing a class", node.layer(), node.symbol)
            } else {
                format!("Place node {} must not carry a class", node.symbol)
            };
            return Err(GraphError::Schema(msg));
        }
        if self.nodes.contains_key(&node.symbol) {
            return Err(GraphError::Conflict(format!("duplicate node symbol {}", node.symbol)));
        }
        self.nodes.insert(node.symbol, node);
        Ok(())
    }

    pub fn add_edge(&mut self, source: NodeSymbol, target: NodeSymbol, edge_type: EdgeType) -> Result<(), GraphError> {
        for end in [source, target] {
            if !self.nodes.contains_key(&end) {
                return Err(GraphError::Schema(format!(
                    "{edge_type} edge {source}->{target} references unknown node {end}"
                )));
            }
        }
        if source == target {
            return Err(GraphError::Schema(format!("self-loop {edge_type} edge on {source}")));
        }
        let (source, target) = match edge_type.connected_layer() {
            Some(layer) => {
                if source.layer() != layer || target.layer() != layer {
                    return Err(GraphError::Schema(format!(
                        "{edge_type} edge {source}-{target} must join two {layer} nodes"
                    )));
                }
                (source.min(target), source.max(target))
            }
            None => (source, target),
        };
        let edge = GraphEdge {
            source,
            target,
            edge_type,
        };
        if !self.edges.insert(edge) {
            return Err(GraphError::Conflict(format!(
                "duplicate {edge_type} edge {source}->{target}"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, symbol: NodeSymbol) -> bool {
        self.nodes.contains_key(&symbol)
    }

    pub fn build(self) -> PropertyGraph {
        let nodes: Vec<GraphNode> = self.nodes.into_values().collect();
        let index: HashMap<NodeSymbol, NodeId> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.symbol, NodeId(i as u32)))
            .collect();
        let mut by_layer: [Vec<NodeId>; 4] = Default::default();
        for (i, n) in nodes.iter().enumerate() {
            by_layer[n.layer().rank()].push(NodeId(i as u32));
        }
        // BTreeSet iteration gives (source, target, type) order
        let mut edges: Vec<GraphEdge> = self.edges.into_iter().collect();
        edges.sort_by_key(|e| (e.edge_type, e.source, e.target));
        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        let mut ends = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let (s, t) = (index[&e.source], index[&e.target]);
            ends.push((s, t));
            out_adj[s.index()].push((t, EdgeId(i as u32)));
            in_adj[t.index()].push((s, EdgeId(i as u32)));
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        let extra_keys = nodes.iter().flat_map(|n| n.extra.keys().cloned()).collect();
        PropertyGraph {
            nodes,
            index,
            by_layer,
            edges,
            ends,
            out_adj,
            in_adj,
            labelspace: self.labelspace,
            extra_keys,
        }
    }
}
