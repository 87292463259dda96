//! Seeded random scene graphs with realistic layer proportions.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scene_graph::{EdgeType, GraphNode, Labelspace, Layer, NodeSymbol, Point3, PropertyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub objects: usize,
    pub objects_per_place: usize,
    pub places_per_room: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(objects: usize, seed: u64) -> Self {
        SyntheticSpec {
            objects,
            objects_per_place: 4,
            places_per_room: 8,
            seed,
        }
    }
}

/// Rooms contain places, places contain objects; places in a room form a
/// connected chain plus random shortcuts, rooms form a chain.
pub fn generate(spec: &SyntheticSpec) -> PropertyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = Labelspace::default();
    let places = spec.objects.div_ceil(spec.objects_per_place.max(1)).max(1);
    let rooms = places.div_ceil(spec.places_per_room.max(1)).max(1);
    let extent = (spec.objects as f64).sqrt().max(1.0) * 4.0;
    let coord = |rng: &mut ChaCha8Rng, z: f64| {
        let x = (rng.random_range(-extent..extent) * 100.0).round() / 100.0;
        let y = (rng.random_range(-extent..extent) * 100.0).round() / 100.0;
        Point3::new(x, y, z)
    };
    let mut b = PropertyGraph::builder(labels.clone());
    let sym = |layer, i: usize| NodeSymbol::new(layer, i as u64);

    for r in 0..rooms {
        let class = labels.rooms.choose(&mut rng).cloned();
        let c = coord(&mut rng, 0.0);
        b.add_node(GraphNode::new(sym(Layer::Room, r), class, c))
            .expect("fresh symbol");
        if r > 0 {
            b.add_edge(sym(Layer::Room, r - 1), sym(Layer::Room, r), EdgeType::RoomConnected)
                .expect("valid edge");
        }
    }
    let mut room_of = Vec::with_capacity(places);
    for p in 0..places {
        let room = p * rooms / places;
        room_of.push(room);
        let c = coord(&mut rng, 0.0);
        b.add_node(GraphNode::new(sym(Layer::Place, p), None, c))
            .expect("fresh symbol");
        b.add_edge(sym(Layer::Room, room), sym(Layer::Place, p), EdgeType::Contains)
            .expect("valid edge");
        if p > 0 && room_of[p - 1] == room {
            b.add_edge(sym(Layer::Place, p - 1), sym(Layer::Place, p), EdgeType::PlaceConnected)
                .expect("valid edge");
        }
    }
    for p in 0..places {
        if rng.random_bool(0.2) {
            let q = rng.random_range(0..places);
            if q != p && room_of[q] == room_of[p] {
                let (lo, hi) = (p.min(q), p.max(q));
                let _ = b.add_edge(sym(Layer::Place, lo), sym(Layer::Place, hi), EdgeType::PlaceConnected);
            }
        }
    }
    for o in 0..spec.objects {
        let class = labels.objects.choose(&mut rng).cloned();
        let z = (rng.random_range(-0.3..0.3f64) * 100.0).round() / 100.0;
        let c = coord(&mut rng, z);
        b.add_node(GraphNode::new(sym(Layer::Object, o), class, c))
            .expect("fresh symbol");
        let place = rng.random_range(0..places);
        b.add_edge(sym(Layer::Place, place), sym(Layer::Object, o), EdgeType::Contains)
            .expect("valid edge");
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::validate;

    #[test]
    fn generated_graphs_validate_and_repeat() {
        let spec = SyntheticSpec::new(200, 7);
        let g = generate(&spec);
        assert_eq!(g.layer_nodes(Layer::Object).len(), 200);
        assert_eq!(g.layer_nodes(Layer::Place).len(), 50);
        assert!(validate(&g).passed(), "{:?}", validate(&g));
        let again = generate(&spec);
        assert_eq!(g.nodes(), again.nodes());
        assert_eq!(g.edges(), again.edges());
    }
}
