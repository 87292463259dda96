//! Random queries on random graphs, checked against a brute-force evaluator
//! that enumerates every variable assignment and every edge choice.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sgg_core::query::{execute, parse_query, Limits, QueryErrorKind, Value};
use sgg_core::scene_graph::{EdgeType, GraphNode, Labelspace, Layer, NodeSymbol, Point3, PropertyGraph};

const CLASSES: [&str; 3] = ["tree", "door", "road"];

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> PropertyGraph {
    let mut b = PropertyGraph::builder(Labelspace::default());
    let mut syms = Vec::new();
    let mut counters = [0u64; 4];
    for _ in 0..n {
        let layer = Layer::ALL[rng.random_range(0..4)];
        let idx = counters[layer as usize];
        counters[layer as usize] += 1;
        let sym: NodeSymbol = format!("{}{}", layer.prefix(), idx).parse().unwrap();
        let class = layer.has_class().then(|| CLASSES[rng.random_range(0..3)].to_string());
        let c = |r: &mut ChaCha8Rng| r.random_range(-40..40) as f64 / 10.0;
        let center = Point3::new(c(rng), c(rng), c(rng));
        b.add_node(GraphNode::new(sym, class, center)).unwrap();
        syms.push(sym);
    }
    let edges = rng.random_range(0..=150.min(n * 3));
    for _ in 0..edges {
        let s = syms[rng.random_range(0..n)];
        let t = syms[rng.random_range(0..n)];
        if s == t {
            continue;
        }
        let ty = if s.layer() == t.layer() && rng.random_bool(0.5) {
            EdgeType::ALL
                .into_iter()
                .find(|e| e.connected_layer() == Some(s.layer()))
                .unwrap()
        } else {
            EdgeType::Contains
        };
        let _ = b.add_edge(s, t, ty);
    }
    b.build()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dir {
    Right,
    Left,
    Both,
}

#[derive(Debug, Clone)]
struct NodeSpec {
    var: Option<usize>,
    label: Option<Layer>,
    class: Option<&'static str>,
    symbol: Option<String>,
}

#[derive(Debug, Clone)]
struct HopSpec {
    ty: Option<EdgeType>,
    dir: Dir,
    len: Option<(Option<u32>, Option<u32>)>,
}

#[derive(Debug, Clone)]
struct PatSpec {
    nodes: Vec<NodeSpec>,
    hops: Vec<HopSpec>,
}

#[derive(Debug, Clone)]
enum Cond {
    ClassEq(usize, &'static str),
    Ne(usize, usize),
    DistLt(usize, usize, f64),
    XGt(usize, f64),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

#[derive(Debug, Clone)]
enum Ret {
    Symbols(Vec<usize>),
    ClassCount(usize),
    CountDistinct(usize),
    DistinctSymbol(usize),
    CountStar,
}

#[derive(Debug, Clone)]
struct QSpec {
    patterns: Vec<PatSpec>,
    where_: Option<Cond>,
    ret: Ret,
    cap: u32,
}

fn var_name(v: usize) -> String {
    format!("n{v}")
}

impl QSpec {
    fn named_vars(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self
            .patterns
            .iter()
            .flat_map(|p| p.nodes.iter().filter_map(|n| n.var))
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    fn text(&self) -> String {
        let mut pats = Vec::new();
        for p in &self.patterns {
            let mut s = node_text(&p.nodes[0]);
            for (h, n) in p.hops.iter().zip(&p.nodes[1..]) {
                let mut inner = String::new();
                if let Some(t) = h.ty {
                    inner.push(':');
                    inner.push_str(t.name());
                }
                if let Some((a, b)) = h.len {
                    inner.push('*');
                    match (a, b) {
                        (None, None) => {}
                        (Some(a), Some(b)) if a == b => inner.push_str(&a.to_string()),
                        (Some(a), None) => inner.push_str(&format!("{a}..")),
                        (None, Some(b)) => inner.push_str(&format!("..{b}")),
                        (Some(a), Some(b)) => inner.push_str(&format!("{a}..{b}")),
                    }
                }
                let body = if inner.is_empty() {
                    String::new()
                } else {
                    format!("[{inner}]")
                };
                s.push_str(&match h.dir {
                    Dir::Right => format!("-{body}->"),
                    Dir::Left => format!("<-{body}-"),
                    Dir::Both => format!("-{body}-"),
                });
                s.push_str(&node_text(n));
            }
            pats.push(s);
        }
        let mut q = format!("MATCH {}", pats.join(", "));
        if let Some(w) = &self.where_ {
            q.push_str(&format!(" WHERE {}", cond_text(w)));
        }
        q.push_str(" RETURN ");
        q.push_str(&match &self.ret {
            Ret::Symbols(vs) => vs
                .iter()
                .map(|v| format!("{}.nodeSymbol", var_name(*v)))
                .collect::<Vec<_>>()
                .join(", "),
            Ret::ClassCount(v) => format!("{}.class AS c, count(*) AS k", var_name(*v)),
            Ret::CountDistinct(v) => format!("count(DISTINCT {}) AS k", var_name(*v)),
            Ret::DistinctSymbol(v) => format!("DISTINCT {}.nodeSymbol AS s", var_name(*v)),
            Ret::CountStar => "count(*) AS k".to_string(),
        });
        q
    }
}

fn node_text(n: &NodeSpec) -> String {
    let mut s = String::from("(");
    if let Some(v) = n.var {
        s.push_str(&var_name(v));
    }
    if let Some(l) = n.label {
        s.push(':');
        s.push_str(l.label());
    }
    let mut props = Vec::new();
    if let Some(c) = n.class {
        props.push(format!("class: '{c}'"));
    }
    if let Some(sym) = &n.symbol {
        props.push(format!("nodeSymbol: '{sym}'"));
    }
    if !props.is_empty() {
        s.push_str(&format!(" {{{}}}", props.join(", ")));
    }
    s.push(')');
    s
}

fn cond_text(c: &Cond) -> String {
    match c {
        Cond::ClassEq(v, s) => format!("{}.class = '{s}'", var_name(*v)),
        Cond::Ne(a, b) => format!("{} <> {}", var_name(*a), var_name(*b)),
        Cond::DistLt(a, b, t) => format!(
            "point.distance({}.center, {}.center) < {t:?}",
            var_name(*a),
            var_name(*b)
        ),
        Cond::XGt(v, t) => format!("{}.center.x > {t:?}", var_name(*v)),
        Cond::Not(c) => format!("NOT ({})", cond_text(c)),
        Cond::And(a, b) => format!("({}) AND ({})", cond_text(a), cond_text(b)),
        Cond::Or(a, b) => format!("({}) OR ({})", cond_text(a), cond_text(b)),
    }
}

fn random_cond(rng: &mut ChaCha8Rng, vars: &[usize], depth: u32) -> Cond {
    let v = |r: &mut ChaCha8Rng| vars[r.random_range(0..vars.len())];
    match rng.random_range(0..if depth == 0 { 4 } else { 7 }) {
        0 => Cond::ClassEq(v(rng), CLASSES[rng.random_range(0..3)]),
        1 => Cond::Ne(v(rng), v(rng)),
        2 => Cond::DistLt(v(rng), v(rng), rng.random_range(1..60) as f64 / 10.0 + 0.05),
        3 => Cond::XGt(v(rng), rng.random_range(-40..40) as f64 / 10.0 + 0.05),
        4 => Cond::Not(Box::new(random_cond(rng, vars, depth - 1))),
        5 => Cond::And(
            Box::new(random_cond(rng, vars, depth - 1)),
            Box::new(random_cond(rng, vars, depth - 1)),
        ),
        _ => Cond::Or(
            Box::new(random_cond(rng, vars, depth - 1)),
            Box::new(random_cond(rng, vars, depth - 1)),
        ),
    }
}

fn random_query(rng: &mut ChaCha8Rng, g: &PropertyGraph, max_slots: usize) -> QSpec {
    let n_patterns = if rng.random_bool(0.3) { 2 } else { 1 };
    let mut slots = 0usize;
    let mut named = Vec::new();
    let mut patterns = Vec::new();
    for _ in 0..n_patterns {
        let hops_wanted = rng.random_range(0..=2);
        let mut nodes = Vec::new();
        let mut hops = Vec::new();
        for i in 0..=hops_wanted {
            // reuse a named variable, introduce one, or stay anonymous
            let var = if !named.is_empty() && rng.random_bool(0.3) {
                Some(named[rng.random_range(0..named.len())])
            } else if slots < max_slots {
                slots += 1;
                if rng.random_bool(0.8) {
                    let v = named.len();
                    named.push(v);
                    Some(v)
                } else {
                    None
                }
            } else if !named.is_empty() {
                Some(named[rng.random_range(0..named.len())])
            } else {
                break;
            };
            let label = rng.random_bool(0.4).then(|| Layer::ALL[rng.random_range(0..4)]);
            let class = rng.random_bool(0.15).then(|| CLASSES[rng.random_range(0..3)]);
            let symbol = (rng.random_bool(0.1) && g.node_count() > 0)
                .then(|| g.nodes()[rng.random_range(0..g.node_count())].symbol.to_string());
            if i > 0 {
                let ty = rng.random_bool(0.75).then(|| EdgeType::ALL[rng.random_range(0..5)]);
                let dir = [Dir::Right, Dir::Left, Dir::Both][rng.random_range(0..3)];
                let len = rng.random_bool(0.3).then(|| {
                    let min = rng.random_bool(0.5).then(|| rng.random_range(1..3));
                    let max = rng.random_bool(0.5).then(|| rng.random_range(min.unwrap_or(1)..5));
                    (min, max)
                });
                hops.push(HopSpec { ty, dir, len });
            }
            nodes.push(NodeSpec {
                var,
                label,
                class,
                symbol,
            });
        }
        if nodes.is_empty() {
            break;
        }
        hops.truncate(nodes.len() - 1);
        patterns.push(PatSpec { nodes, hops });
    }
    let where_ = (!named.is_empty() && rng.random_bool(0.5)).then(|| random_cond(rng, &named, 2));
    let pick = |r: &mut ChaCha8Rng| named[r.random_range(0..named.len())];
    let ret = if named.is_empty() {
        Ret::CountStar
    } else {
        match rng.random_range(0..5) {
            0 => Ret::Symbols(named.clone()),
            1 => Ret::ClassCount(pick(rng)),
            2 => Ret::CountDistinct(pick(rng)),
            3 => Ret::DistinctSymbol(pick(rng)),
            _ => Ret::CountStar,
        }
    };
    let cap = [2, 3, 32][rng.random_range(0..3)];
    QSpec {
        patterns,
        where_,
        ret,
        cap,
    }
}

// ---- brute force ----

/// Boolean adjacency rows as bitmasks (graphs have at most 64 nodes).
struct Oracle<'g> {
    g: &'g PropertyGraph,
    n: usize,
    // edges by (source position, target position)
    pair_edges: Vec<Vec<Vec<usize>>>,
    reach_cache: HashMap<(Option<EdgeType>, u8, Option<u32>, Option<u32>, u32), (Vec<u64>, Vec<bool>)>,
}

fn dir_code(d: Dir) -> u8 {
    d as u8
}

impl<'g> Oracle<'g> {
    fn new(g: &'g PropertyGraph) -> Self {
        let n = g.node_count();
        let pos: HashMap<NodeSymbol, usize> = g.nodes().iter().enumerate().map(|(i, n)| (n.symbol, i)).collect();
        let mut pair_edges = vec![vec![Vec::new(); n]; n];
        for (i, e) in g.edges().iter().enumerate() {
            pair_edges[pos[&e.source]][pos[&e.target]].push(i);
        }
        Oracle {
            g,
            n,
            pair_edges,
            reach_cache: HashMap::new(),
        }
    }

    /// Edges usable from `a` to `b` for one hop.
    fn hop_edges(&self, a: usize, b: usize, h: &HopSpec) -> Vec<usize> {
        let edges = self.g.edges();
        let fwd = self.pair_edges[a][b].iter().map(|&i| (i, true));
        let back = self.pair_edges[b][a].iter().map(|&i| (i, false));
        let mut out: Vec<usize> = fwd
            .chain(back)
            .filter(|(i, _)| h.ty.is_none_or(|t| t == edges[*i].edge_type))
            .filter(|(i, forward)| {
                edges[*i].edge_type.is_undirected()
                    || match h.dir {
                        Dir::Right => *forward,
                        Dir::Left => !*forward,
                        Dir::Both => true,
                    }
            })
            .map(|(i, _)| i)
            .collect();
        out.dedup();
        out
    }

    fn adjacency(&self, h: &HopSpec) -> Vec<u64> {
        let mut rows = vec![0u64; self.n];
        for (a, row) in rows.iter_mut().enumerate() {
            for b in 0..self.n {
                if !self.hop_edges(a, b, h).is_empty() {
                    *row |= 1 << b;
                }
            }
        }
        rows
    }

    /// Union of walk endpoints for lengths min..max, and per-start overflow flags.
    fn reach(&mut self, h: &HopSpec, cap: u32) -> (Vec<u64>, Vec<bool>) {
        let (min, max) = h.len.unwrap();
        let key = (h.ty, dir_code(h.dir), min, max, cap);
        if let Some(hit) = self.reach_cache.get(&key) {
            return hit.clone();
        }
        let adj = self.adjacency(h);
        let mul = |m: &[u64]| -> Vec<u64> {
            m.iter()
                .map(|row| {
                    (0..self.n)
                        .filter(|j| row >> j & 1 == 1)
                        .fold(0u64, |acc, j| acc | adj[j])
                })
                .collect()
        };
        let lo = min.unwrap_or(1);
        let hi = max.unwrap_or(cap);
        let mut union = vec![0u64; self.n];
        let mut over = vec![false; self.n];
        if lo > cap || hi > cap {
            over = vec![true; self.n];
        } else {
            let mut power: Vec<u64> = (0..self.n).map(|i| 1u64 << i).collect();
            for k in 1..=hi {
                power = mul(&power);
                if k >= lo {
                    for i in 0..self.n {
                        union[i] |= power[i];
                    }
                }
            }
            if max.is_none() {
                let next = mul(&power);
                for i in 0..self.n {
                    over[i] = next[i] & !union[i] != 0;
                }
            }
        }
        self.reach_cache.insert(key, (union.clone(), over.clone()));
        (union, over)
    }

    fn node_ok(&self, id: usize, spec: &NodeSpec) -> bool {
        let n = &self.g.nodes()[id];
        spec.label.is_none_or(|l| l == n.layer())
            && spec.class.is_none_or(|c| n.class.as_deref() == Some(c))
            && spec.symbol.as_ref().is_none_or(|s| n.symbol.to_string() == *s)
    }

    fn cond(&self, c: &Cond, asg: &[usize]) -> bool {
        let node = |v: &usize| &self.g.nodes()[asg[*v]];
        match c {
            Cond::ClassEq(v, s) => node(v).class.as_deref() == Some(*s),
            Cond::Ne(a, b) => asg[*a] != asg[*b],
            Cond::DistLt(a, b, t) => node(a).center.distance(&node(b).center) < *t,
            Cond::XGt(v, t) => node(v).center.x > *t,
            Cond::Not(c) => !self.cond(c, asg),
            Cond::And(a, b) => self.cond(a, asg) && self.cond(b, asg),
            Cond::Or(a, b) => self.cond(a, asg) || self.cond(b, asg),
        }
    }
}

/// Number of ways to choose one edge per hop with no edge used twice.
fn distinct_choices(options: &[Vec<usize>], used: &mut Vec<usize>) -> u64 {
    let Some((first, rest)) = options.split_first() else {
        return 1;
    };
    let mut total = 0;
    for &e in first {
        if used.contains(&e) {
            continue;
        }
        used.push(e);
        total += distinct_choices(rest, used);
        used.pop();
    }
    total
}

enum Expected {
    Rows(Vec<Vec<String>>),
    DepthExceeded,
}

/// Slot of each node position: named variables share a slot, anonymous
/// positions get fresh ones.
fn slots(q: &QSpec) -> (Vec<Vec<usize>>, usize) {
    let named = q.named_vars();
    let mut next = named.iter().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for p in &q.patterns {
        let mut ps = Vec::new();
        for n in &p.nodes {
            ps.push(match n.var {
                Some(v) => v,
                None => {
                    next += 1;
                    next - 1
                }
            });
        }
        out.push(ps);
    }
    (out, next)
}

fn brute_force(o: &mut Oracle<'_>, q: &QSpec) -> Expected {
    let (pos, width) = slots(q);
    let n = o.n;
    // flatten positions in evaluation order
    let mut order: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in q.patterns.iter().enumerate() {
        for ni in 0..p.nodes.len() {
            order.push((pi, ni));
        }
    }
    let mut reaches: HashMap<(usize, usize), (Vec<u64>, Vec<bool>)> = HashMap::new();
    for (pi, p) in q.patterns.iter().enumerate() {
        for (hi, h) in p.hops.iter().enumerate() {
            if h.len.is_some() {
                reaches.insert((pi, hi), o.reach(h, q.cap));
            }
        }
    }
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut multiplicity: Vec<u64> = Vec::new();
    let mut overflow = false;
    let total = (n as u64).pow(width as u32);
    for code in 0..total {
        let mut asg = vec![0usize; width];
        let mut c = code;
        for slot in asg.iter_mut() {
            *slot = (c % n as u64) as usize;
            c /= n as u64;
        }
        // walk positions in order; a prefix that satisfies everything so far
        // triggers evaluation of the next variable-length hop
        let mut single_opts: Vec<Vec<usize>> = Vec::new();
        let mut ok = true;
        'walk: for &(pi, ni) in &order {
            let p = &q.patterns[pi];
            let id = asg[pos[pi][ni]];
            if ni > 0 {
                let h = &p.hops[ni - 1];
                let prev = asg[pos[pi][ni - 1]];
                match &reaches.get(&(pi, ni - 1)) {
                    Some((union, over)) => {
                        if distinct_choices(&single_opts, &mut Vec::new()) > 0 && over[prev] {
                            overflow = true;
                        }
                        if union[prev] >> id & 1 == 0 {
                            ok = false;
                            break 'walk;
                        }
                    }
                    None => {
                        let es = o.hop_edges(prev, id, h);
                        if es.is_empty() {
                            ok = false;
                            break 'walk;
                        }
                        single_opts.push(es);
                    }
                }
            }
            if !o.node_ok(id, &p.nodes[ni]) {
                ok = false;
                break 'walk;
            }
            if distinct_choices(&single_opts, &mut Vec::new()) == 0 {
                ok = false;
                break 'walk;
            }
        }
        if !ok {
            continue;
        }
        if q.where_.as_ref().is_some_and(|w| !o.cond(w, &asg)) {
            continue;
        }
        let m = distinct_choices(&single_opts, &mut Vec::new());
        rows.push(asg);
        multiplicity.push(m);
    }
    if overflow {
        return Expected::DepthExceeded;
    }
    let sym = |id: usize| o.g.nodes()[id].symbol.to_string();
    let class = |id: usize| o.g.nodes()[id].class.clone().unwrap_or_else(|| "null".into());
    let expanded: Vec<&Vec<usize>> = rows
        .iter()
        .zip(&multiplicity)
        .flat_map(|(r, m)| std::iter::repeat_n(r, *m as usize))
        .collect();
    let mut out: Vec<Vec<String>> = match &q.ret {
        Ret::Symbols(vs) => expanded
            .iter()
            .map(|r| vs.iter().map(|v| sym(r[*v])).collect())
            .collect(),
        Ret::CountStar => vec![vec![expanded.len().to_string()]],
        Ret::CountDistinct(v) => {
            let mut ids: Vec<usize> = expanded.iter().map(|r| r[*v]).collect();
            ids.sort_unstable();
            ids.dedup();
            vec![vec![ids.len().to_string()]]
        }
        Ret::DistinctSymbol(v) => {
            let mut ids: Vec<String> = expanded.iter().map(|r| sym(r[*v])).collect();
            ids.sort();
            ids.dedup();
            ids.into_iter().map(|s| vec![s]).collect()
        }
        Ret::ClassCount(v) => {
            let mut counts: HashMap<String, usize> = HashMap::new();
            for r in &expanded {
                *counts.entry(class(r[*v])).or_default() += 1;
            }
            counts.into_iter().map(|(c, k)| vec![c, k.to_string()]).collect()
        }
    };
    out.sort();
    Expected::Rows(out)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        Value::Int(i) => i.to_string(),
        Value::Null => "null".into(),
        other => panic!("unexpected cell {other:?}"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub checked: usize,
    pub depth_exceeded: usize,
    pub nonempty: usize,
}

/// `graphs` random graphs of 5 to 50 nodes, `per_graph` random queries on
/// each; stops at the first disagreement with the enumerator.
pub fn sweep(seed: u64, graphs: usize, per_graph: usize) -> Result<SweepStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SweepStats::default();
    for _ in 0..graphs {
        let n = rng.random_range(5..=50);
        let g = random_graph(&mut rng, n);
        let mut oracle = Oracle::new(&g);
        let max_slots = if n <= 20 { 3 } else { 2 };
        for _ in 0..per_graph {
            let spec = random_query(&mut rng, &g, max_slots);
            let text = spec.text();
            let ast = parse_query(&text).map_err(|e| format!("{text}: {e}"))?;
            let limits = Limits {
                depth_cap: spec.cap,
                row_cap: 10_000_000,
            };
            let got = execute(&g, &ast, &limits);
            match brute_force(&mut oracle, &spec) {
                Expected::DepthExceeded => match got {
                    Err(e) if e.kind == QueryErrorKind::DepthExceeded => stats.depth_exceeded += 1,
                    Err(e) => return Err(format!("{text}: expected depth-exceeded, got {e}")),
                    Ok(_) => return Err(format!("{text}: expected depth-exceeded, got rows")),
                },
                Expected::Rows(want) => {
                    let table = got.map_err(|e| format!("{text}: {e}"))?;
                    let mut rows: Vec<Vec<String>> = table.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
                    rows.sort();
                    if rows != want {
                        return Err(format!("{text}: engine {rows:?}, enumerator {want:?}"));
                    }
                    if !want.is_empty() && want != [vec!["0".to_string()]] {
                        stats.nonempty += 1;
                    }
                }
            }
            stats.checked += 1;
        }
    }
    Ok(stats)
}
