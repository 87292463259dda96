use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use super::ast::*;
use super::error::{QueryError, QueryErrorKind};
use super::parser::analyze;
use super::value::{Value, ValueKey};
use crate::scene_graph::{
    Direction, EdgeId, EdgeType, GraphEdge, Layer, NodeId, NodeSymbol, Point3, PropValue, PropertyGraph,
};

/// Evaluation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest number of hops a variable-length relationship may take.
    pub depth_cap: u32,
    /// Largest number of intermediate rows any clause may produce.
    pub row_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            depth_cap: 32,
            row_cap: 100_000,
        }
    }
}

/// Copy of a node's visible properties, taken when a result is built.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSnapshot {
    pub symbol: NodeSymbol,
    pub class: Option<String>,
    pub center: Point3,
    pub extra: BTreeMap<String, PropValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Row count before SKIP/LIMIT of the final projection.
    pub total_rows: usize,
    /// Number of property assignments applied by SET, if the query had one.
    pub properties_set: Option<usize>,
    pub(crate) nodes: BTreeMap<NodeId, NodeSnapshot>,
    pub(crate) edges: BTreeMap<EdgeId, GraphEdge>,
}

impl ResultTable {
    pub fn node(&self, id: NodeId) -> Option<&NodeSnapshot> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&GraphEdge> {
        self.edges.get(&id)
    }

    /// Values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Run a read-only query.
pub fn execute(graph: &PropertyGraph, query: &Query, limits: &Limits) -> Result<ResultTable, QueryError> {
    if query.is_mutating() {
        return Err(QueryError::unsupported(
            "this query contains SET and needs exclusive access to the graph",
        ));
    }
    let analysis = analyze(query)?;
    let ctx = Ctx::new(graph, limits, &analysis.set_props);
    ctx.check_properties(&analysis.node_props)?;
    let (frame, rest) = ctx.run_reading(&query.clauses)?;
    match rest {
        [Clause::Return(p)] => ctx.finish(frame, p, None),
        _ => Err(QueryError::new(QueryErrorKind::Parse, "query must end with RETURN")),
    }
}

/// Run any query, applying SET assignments to `graph`.
pub fn execute_mut(graph: &mut PropertyGraph, query: &Query, limits: &Limits) -> Result<ResultTable, QueryError> {
    if !query.is_mutating() {
        return execute(graph, query, limits);
    }
    let analysis = analyze(query)?;
    let (frame, assignments, ret) = {
        let ctx = Ctx::new(graph, limits, &analysis.set_props);
        ctx.check_properties(&analysis.node_props)?;
        let (frame, rest) = ctx.run_reading(&query.clauses)?;
        let (items, ret) = match rest {
            [Clause::Set(items)] => (items, None),
            [Clause::Set(items), Clause::Return(p)] => (items, Some(p)),
            _ => {
                return Err(QueryError::new(
                    QueryErrorKind::Parse,
                    "SET must be the last clause before RETURN",
                ))
            }
        };
        let assignments = ctx.plan_set(&frame, items)?;
        (frame, assignments, ret)
    };
    let count = assignments.len();
    for a in assignments {
        match a {
            Assignment::Class(id, class) => graph.set_class(id, Some(class)),
            Assignment::Center(id, p) => graph.set_center(id, p),
            Assignment::Extra(id, key, v) => graph.set_extra(id, &key, v),
        }
    }
    let ctx = Ctx::new(graph, limits, &analysis.set_props);
    match ret {
        Some(p) => ctx.finish(frame, p, Some(count)),
        None => Ok(ResultTable {
            columns: vec!["propertiesSet".to_string()],
            rows: vec![vec![Value::Int(count as i64)]],
            total_rows: 1,
            properties_set: Some(count),
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
        }),
    }
}

enum Assignment {
    Class(NodeId, String),
    Center(NodeId, Point3),
    Extra(NodeId, String, Option<PropValue>),
}

/// Variable names and the rows binding them.
#[derive(Debug, Clone)]
struct Frame {
    index: HashMap<String, usize>,
    width: usize,
    rows: Vec<Vec<Value>>,
}

impl Frame {
    fn unit() -> Frame {
        Frame {
            index: HashMap::new(),
            width: 0,
            rows: vec![Vec::new()],
        }
    }

    fn slot(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.index.insert(name.to_string(), self.width);
        self.width += 1;
        self.width - 1
    }
}

/// Variable lookup across up to two scopes; the first wins.
#[derive(Clone, Copy)]
struct Env<'a> {
    scopes: [Option<(&'a HashMap<String, usize>, &'a [Value])>; 2],
    aggs: Option<&'a HashMap<*const Expr, Value>>,
}

impl<'a> Env<'a> {
    fn new(index: &'a HashMap<String, usize>, row: &'a [Value]) -> Self {
        Env {
            scopes: [Some((index, row)), None],
            aggs: None,
        }
    }

    fn lookup(&self, name: &str) -> Option<&'a Value> {
        self.scopes
            .iter()
            .flatten()
            .find_map(|(index, row)| index.get(name).and_then(|&i| row.get(i)))
    }
}

type ReachKey = (NodeId, Option<EdgeType>, Direction, u32, u32, bool);

struct Ctx<'g> {
    graph: &'g PropertyGraph,
    limits: Limits,
    known_props: HashSet<String>,
    reach_cache: RefCell<HashMap<ReachKey, Rc<Vec<NodeId>>>>,
}

const BASE_PROPS: [&str; 3] = ["nodeSymbol", "class", "center"];

fn direction(d: RelDirection) -> Direction {
    match d {
        RelDirection::Right => Direction::Out,
        RelDirection::Left => Direction::In,
        RelDirection::Both => Direction::Either,
    }
}

fn truth(v: &Value) -> Result<Option<bool>, QueryError> {
    match v {
        Value::Bool(b) => Ok(Some(*b)),
        Value::Null => Ok(None),
        other => Err(QueryError::type_mismatch(format!(
            "expected a boolean, got {}",
            other.type_name()
        ))),
    }
}

fn opt_bool(b: Option<bool>) -> Value {
    b.map_or(Value::Null, Value::Bool)
}

impl<'g> Ctx<'g> {
    fn new(graph: &'g PropertyGraph, limits: &Limits, set_props: &BTreeSet<String>) -> Self {
        let known_props = BASE_PROPS
            .iter()
            .map(|s| s.to_string())
            .chain(graph.extra_keys().iter().cloned())
            .chain(set_props.iter().cloned())
            .collect();
        Ctx {
            graph,
            limits: *limits,
            known_props,
            reach_cache: RefCell::new(HashMap::new()),
        }
    }

    fn check_properties(&self, used: &BTreeSet<String>) -> Result<(), QueryError> {
        for key in used {
            if !self.known_props.contains(key) {
                return Err(self.unknown_property(key));
            }
        }
        Ok(())
    }

    fn unknown_property(&self, key: &str) -> QueryError {
        let mut known: Vec<&str> = self.known_props.iter().map(String::as_str).collect();
        known.sort_unstable();
        QueryError::unknown(format!(
            "unknown node property `{key}`; available properties: {}",
            known.join(", ")
        ))
    }

    /// Run MATCH and WITH clauses; returns the remaining clauses.
    fn run_reading<'q>(&self, clauses: &'q [Clause]) -> Result<(Frame, &'q [Clause]), QueryError> {
        let mut frame = Frame::unit();
        for (i, clause) in clauses.iter().enumerate() {
            match clause {
                Clause::Match(m) => frame = self.run_match(frame, m)?,
                Clause::With(p, w) => {
                    let (names, rows, _) = self.project(&frame, p)?;
                    let mut next = Frame::unit();
                    for n in &names {
                        next.slot(n);
                    }
                    next.rows = rows;
                    if let Some(w) = w {
                        let rows = std::mem::take(&mut next.rows);
                        next.rows = self.filter(&next, w, rows)?;
                    }
                    frame = next;
                }
                _ => return Ok((frame, &clauses[i..])),
            }
        }
        Ok((frame, &[]))
    }

    fn filter(&self, frame: &Frame, cond: &Expr, rows: Vec<Vec<Value>>) -> Result<Vec<Vec<Value>>, QueryError> {
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let keep = truth(&self.eval(cond, Env::new(&frame.index, &row))?)? == Some(true);
            if keep {
                out.push(row);
            }
        }
        Ok(out)
    }

    fn finish(&self, frame: Frame, p: &Projection, properties_set: Option<usize>) -> Result<ResultTable, QueryError> {
        let (columns, rows, total_rows) = self.project(&frame, p)?;
        let mut nodes = BTreeMap::new();
        let mut edges = BTreeMap::new();
        for v in rows.iter().flatten() {
            self.snapshot(v, &mut nodes, &mut edges);
        }
        Ok(ResultTable {
            columns,
            rows,
            total_rows,
            properties_set,
            nodes,
            edges,
        })
    }

    fn snapshot(&self, v: &Value, nodes: &mut BTreeMap<NodeId, NodeSnapshot>, edges: &mut BTreeMap<EdgeId, GraphEdge>) {
        match v {
            Value::Node(id) => {
                nodes.entry(*id).or_insert_with(|| {
                    let n = self.graph.node_at(*id);
                    NodeSnapshot {
                        symbol: n.symbol,
                        class: n.class.clone(),
                        center: n.center,
                        extra: n.extra.clone(),
                    }
                });
            }
            Value::Edge(id) => {
                edges.entry(*id).or_insert_with(|| *self.graph.edge_at(*id));
            }
            Value::List(items) => items.iter().for_each(|i| self.snapshot(i, nodes, edges)),
            _ => {}
        }
    }

    // ---- MATCH ----

    fn run_match(&self, mut frame: Frame, m: &MatchClause) -> Result<Frame, QueryError> {
        let mut paths = Vec::with_capacity(m.patterns.len());
        for p in &m.patterns {
            let start = self.compile_node(&mut frame, &p.start);
            let mut hops = Vec::with_capacity(p.hops.len());
            for (rel, node) in &p.hops {
                let rel_slot = rel.var.as_ref().map(|v| frame.slot(v));
                hops.push((rel, rel_slot, self.compile_node(&mut frame, node)));
            }
            paths.push((start, hops));
        }
        let input = std::mem::take(&mut frame.rows);
        let mut out = Vec::new();
        for mut row in input {
            row.resize(frame.width, Value::Null);
            let mut used = Vec::new();
            self.match_paths(&frame, &paths, 0, &mut row, &mut used, &mut out)?;
        }
        frame.rows = match &m.where_ {
            Some(w) => self.filter(&frame, w, out)?,
            None => out,
        };
        Ok(frame)
    }

    fn compile_node<'p>(&self, frame: &mut Frame, node: &'p NodePattern) -> CompiledNode<'p> {
        CompiledNode {
            pattern: node,
            slot: node.var.as_ref().map(|v| frame.slot(v)),
        }
    }

    fn match_paths(
        &self,
        frame: &Frame,
        paths: &[Path<'_>],
        pi: usize,
        row: &mut Vec<Value>,
        used: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<Value>>,
    ) -> Result<(), QueryError> {
        let Some((start, hops)) = paths.get(pi) else {
            if out.len() >= self.limits.row_cap {
                return Err(self.row_limit());
            }
            out.push(row.clone());
            return Ok(());
        };
        for id in self.candidates(frame, start, row)? {
            if let Some(prev) = self.bind_node(frame, start, id, row)? {
                self.match_hops(frame, paths, pi, hops, 0, id, row, used, out)?;
                if let Some(slot) = start.slot {
                    row[slot] = prev;
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn match_hops(
        &self,
        frame: &Frame,
        paths: &[Path<'_>],
        pi: usize,
        hops: &[Hop<'_>],
        hi: usize,
        cur: NodeId,
        row: &mut Vec<Value>,
        used: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<Value>>,
    ) -> Result<(), QueryError> {
        let Some((rel, rel_slot, next)) = hops.get(hi) else {
            return self.match_paths(frame, paths, pi + 1, row, used, out);
        };
        let dir = direction(rel.direction);
        match rel.length {
            None => {
                for (nb, e) in self.graph.steps(cur, rel.edge_type, dir) {
                    if used.contains(&e) {
                        continue;
                    }
                    if let Some(prev) = self.bind_node(frame, next, nb, row)? {
                        used.push(e);
                        if let Some(s) = rel_slot {
                            row[*s] = Value::Edge(e);
                        }
                        self.match_hops(frame, paths, pi, hops, hi + 1, nb, row, used, out)?;
                        if let Some(s) = rel_slot {
                            row[*s] = Value::Null;
                        }
                        used.pop();
                        if let Some(slot) = next.slot {
                            row[slot] = prev;
                        }
                    }
                }
            }
            Some(len) => {
                let targets = self.reach(cur, rel.edge_type, dir, len)?;
                for &nb in targets.iter() {
                    if let Some(prev) = self.bind_node(frame, next, nb, row)? {
                        self.match_hops(frame, paths, pi, hops, hi + 1, nb, row, used, out)?;
                        if let Some(slot) = next.slot {
                            row[slot] = prev;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn row_limit(&self) -> QueryError {
        QueryError::new(
            QueryErrorKind::RowLimitExceeded,
            format!(
                "the query produced more than {} rows; add filters or LIMIT",
                self.limits.row_cap
            ),
        )
    }

    /// Node ids to try for an unbound pattern node, ascending.
    fn candidates(&self, frame: &Frame, node: &CompiledNode<'_>, row: &[Value]) -> Result<Vec<NodeId>, QueryError> {
        if let Some(slot) = node.slot {
            if let Value::Node(id) = row[slot] {
                return Ok(vec![id]);
            }
        }
        for (key, e) in &node.pattern.props {
            if key == "nodeSymbol" {
                if let Value::Str(s) = self.eval(e, Env::new(&frame.index, row))? {
                    let found = s.parse().ok().and_then(|sym| self.graph.id_of(sym));
                    return Ok(found.into_iter().collect());
                }
            }
        }
        Ok(match node.pattern.label {
            Some(layer) => self.graph.layer_nodes(layer).to_vec(),
            None => self.graph.node_ids().collect(),
        })
    }

    /// Bind `id` to the pattern node if it matches; returns the slot's previous value.
    fn bind_node(
        &self,
        frame: &Frame,
        node: &CompiledNode<'_>,
        id: NodeId,
        row: &mut [Value],
    ) -> Result<Option<Value>, QueryError> {
        let prev = match node.slot {
            Some(slot) => match &row[slot] {
                Value::Node(bound) if *bound != id => return Ok(None),
                Value::Node(_) | Value::Null => row[slot].clone(),
                other => {
                    return Err(QueryError::type_mismatch(format!(
                        "variable bound to a {} used as a node",
                        other.type_name()
                    )))
                }
            },
            None => Value::Null,
        };
        let n = self.graph.node_at(id);
        if node.pattern.label.is_some_and(|l| l != n.layer()) {
            return Ok(None);
        }
        for (key, e) in &node.pattern.props {
            let want = self.eval(e, Env::new(&frame.index, row))?;
            let have = self.node_property(id, key)?;
            if have.equals(&want) != Some(true) {
                return Ok(None);
            }
        }
        if let Some(slot) = node.slot {
            row[slot] = Value::Node(id);
        }
        Ok(Some(prev))
    }

    /// Endpoints of variable-length walks from `start`, ascending.
    fn reach(
        &self,
        start: NodeId,
        ty: Option<EdgeType>,
        dir: Direction,
        len: VarLength,
    ) -> Result<Rc<Vec<NodeId>>, QueryError> {
        let cap = self.limits.depth_cap;
        let min = len.min.unwrap_or(1);
        let (max, unbounded) = match len.max {
            Some(m) => (m, false),
            None => (cap, true),
        };
        if max > cap || min > cap {
            return Err(QueryError::new(
                QueryErrorKind::DepthExceeded,
                format!(
                    "variable-length bound {} exceeds the depth cap of {cap} hops",
                    max.max(min)
                ),
            ));
        }
        let key = (start, ty, dir, min, max, unbounded);
        if let Some(hit) = self.reach_cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let n = self.graph.node_count();
        let mut level = vec![false; n];
        level[start.index()] = true;
        let mut union = vec![false; n];
        let mut depth = 0;
        while depth < max {
            level = self.step_level(&level, ty, dir);
            depth += 1;
            if !level.contains(&true) {
                break;
            }
            if depth >= min {
                union.iter_mut().zip(&level).for_each(|(u, l)| *u |= *l);
            }
        }
        if unbounded && depth == max && level.contains(&true) {
            let next = self.step_level(&level, ty, dir);
            if next.iter().zip(&union).any(|(nx, u)| *nx && !*u) {
                return Err(QueryError::new(
                    QueryErrorKind::DepthExceeded,
                    format!(
                        "variable-length expansion from {} reaches new nodes beyond the depth cap of {cap} hops; give an explicit upper bound",
                        self.graph.node_at(start).symbol
                    ),
                ));
            }
        }
        let result: Rc<Vec<NodeId>> = Rc::new(
            union
                .iter()
                .enumerate()
                .filter(|(_, u)| **u)
                .map(|(i, _)| NodeId(i as u32))
                .collect(),
        );
        self.reach_cache.borrow_mut().insert(key, result.clone());
        Ok(result)
    }

    fn step_level(&self, level: &[bool], ty: Option<EdgeType>, dir: Direction) -> Vec<bool> {
        let mut next = vec![false; level.len()];
        for (i, _) in level.iter().enumerate().filter(|(_, on)| **on) {
            for (nb, _) in self.graph.steps(NodeId(i as u32), ty, dir) {
                next[nb.index()] = true;
            }
        }
        next
    }

    // ---- projection ----

    /// Returns column names, projected rows and the row count before SKIP/LIMIT.
    fn project(&self, frame: &Frame, p: &Projection) -> Result<(Vec<String>, Vec<Vec<Value>>, usize), QueryError> {
        let names: Vec<String> = p
            .items
            .iter()
            .map(|i| match (&i.alias, &i.expr) {
                (None, Expr::Var(v)) => v.clone(),
                _ => i.column_name(),
            })
            .collect();
        let aggregating = p.items.iter().any(|i| i.expr.contains_aggregate());
        // `sources[i]` is the input row behind output row `i` when one exists
        let (mut rows, sources): (Vec<Vec<Value>>, Option<Vec<usize>>) = if aggregating {
            (self.aggregate(frame, p)?, None)
        } else {
            let mut rows = Vec::with_capacity(frame.rows.len());
            for row in &frame.rows {
                let env = Env::new(&frame.index, row);
                let mut out = Vec::with_capacity(p.items.len());
                for item in &p.items {
                    out.push(self.eval(&item.expr, env)?);
                }
                rows.push(out);
            }
            let n = rows.len();
            (rows, Some((0..n).collect()))
        };
        let sources = if p.distinct {
            let mut seen = HashSet::new();
            rows.retain(|r| seen.insert(r.iter().map(Value::key).collect::<Vec<ValueKey>>()));
            None
        } else {
            sources
        };
        if !p.order_by.is_empty() {
            let out_index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
            let mut keyed = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let mut env = Env::new(&out_index, row);
                if let Some(src) = &sources {
                    env.scopes[1] = Some((&frame.index, &frame.rows[src[i]]));
                }
                let mut keys = Vec::with_capacity(p.order_by.len());
                for s in &p.order_by {
                    let v = match p.items.iter().position(|it| it.expr == s.expr) {
                        Some(j) => row[j].clone(),
                        None => self.eval(&s.expr, env)?,
                    };
                    keys.push(v);
                }
                keyed.push((keys, i));
            }
            keyed.sort_by(|(a, _), (b, _)| {
                for ((x, y), s) in a.iter().zip(b).zip(&p.order_by) {
                    let c = x.sort_cmp(y);
                    if c != Ordering::Equal {
                        return if s.descending { c.reverse() } else { c };
                    }
                }
                Ordering::Equal
            });
            let mut slots: Vec<Option<Vec<Value>>> = rows.into_iter().map(Some).collect();
            rows = keyed
                .into_iter()
                .map(|(_, i)| slots[i].take().unwrap_or_default())
                .collect();
        }
        let total = rows.len();
        let skip = p.skip.map_or(0, |s| s.min(total as u64) as usize);
        let rows: Vec<Vec<Value>> = rows
            .into_iter()
            .skip(skip)
            .take(p.limit.map_or(usize::MAX, |l| l.min(usize::MAX as u64) as usize))
            .collect();
        Ok((names, rows, total))
    }

    fn aggregate(&self, frame: &Frame, p: &Projection) -> Result<Vec<Vec<Value>>, QueryError> {
        let key_items: Vec<usize> = (0..p.items.len())
            .filter(|&i| !p.items[i].expr.contains_aggregate())
            .collect();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut by_key: HashMap<Vec<ValueKey>, usize> = HashMap::new();
        for (ri, row) in frame.rows.iter().enumerate() {
            let env = Env::new(&frame.index, row);
            let mut key = Vec::with_capacity(key_items.len());
            for &i in &key_items {
                key.push(self.eval(&p.items[i].expr, env)?.key());
            }
            let g = *by_key.entry(key).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(ri);
        }
        if groups.is_empty() && key_items.is_empty() {
            groups.push(Vec::new());
        }
        let mut agg_exprs: Vec<&Expr> = Vec::new();
        for item in &p.items {
            collect_aggs(&item.expr, &mut agg_exprs);
        }
        let empty_row = vec![Value::Null; frame.width];
        let mut out = Vec::with_capacity(groups.len());
        for members in &groups {
            let mut aggs: HashMap<*const Expr, Value> = HashMap::new();
            for e in &agg_exprs {
                aggs.insert(*e as *const Expr, self.eval_agg(frame, e, members)?);
            }
            let first: &[Value] = members.first().map_or(&empty_row[..], |&i| &frame.rows[i][..]);
            let mut env = Env::new(&frame.index, first);
            env.aggs = Some(&aggs);
            let mut row = Vec::with_capacity(p.items.len());
            for item in &p.items {
                row.push(self.eval(&item.expr, env)?);
            }
            out.push(row);
        }
        Ok(out)
    }

    fn eval_agg(&self, frame: &Frame, e: &Expr, members: &[usize]) -> Result<Value, QueryError> {
        let Expr::Agg { func, distinct, arg } = e else {
            return Err(QueryError::type_mismatch("not an aggregate"));
        };
        let Some(arg) = arg else {
            return Ok(Value::Int(members.len() as i64));
        };
        let mut values = Vec::with_capacity(members.len());
        let mut seen = HashSet::new();
        for &i in members {
            let v = self.eval(arg, Env::new(&frame.index, &frame.rows[i]))?;
            if v.is_null() || (*distinct && !seen.insert(v.key())) {
                continue;
            }
            values.push(v);
        }
        Ok(match func {
            AggFunc::Count => Value::Int(values.len() as i64),
            AggFunc::Collect => Value::List(values),
            AggFunc::Min => values.into_iter().min_by(|a, b| a.sort_cmp(b)).unwrap_or(Value::Null),
            AggFunc::Max => values.into_iter().max_by(|a, b| a.sort_cmp(b)).unwrap_or(Value::Null),
            AggFunc::Sum | AggFunc::Avg => {
                let mut int_sum: Option<i64> = Some(0);
                let mut float_sum = 0.0;
                for v in &values {
                    match v {
                        Value::Int(i) => int_sum = int_sum.and_then(|s| s.checked_add(*i)),
                        Value::Float(_) => int_sum = None,
                        other => {
                            return Err(QueryError::type_mismatch(format!(
                                "{} expects numbers, got {}",
                                if *func == AggFunc::Sum { "sum" } else { "avg" },
                                other.type_name()
                            )))
                        }
                    }
                    float_sum += v.as_f64().unwrap_or(0.0);
                }
                if *func == AggFunc::Avg {
                    if values.is_empty() {
                        Value::Null
                    } else {
                        Value::Float(float_sum / values.len() as f64)
                    }
                } else if values.iter().all(|v| matches!(v, Value::Int(_))) {
                    Value::Int(int_sum.ok_or_else(|| QueryError::type_mismatch("integer overflow in sum"))?)
                } else {
                    Value::Float(float_sum)
                }
            }
        })
    }

    // ---- SET ----

    fn plan_set(&self, frame: &Frame, items: &[SetItem]) -> Result<Vec<Assignment>, QueryError> {
        let mut out = Vec::new();
        for row in &frame.rows {
            let env = Env::new(&frame.index, row);
            for item in items {
                let id = match env.lookup(&item.var) {
                    Some(Value::Node(id)) => *id,
                    Some(Value::Null) => continue,
                    _ => {
                        return Err(QueryError::type_mismatch(format!(
                            "SET target `{}` is not a node",
                            item.var
                        )))
                    }
                };
                let value = self.eval(&item.value, env)?;
                let node = self.graph.node_at(id);
                out.push(match item.property.as_str() {
                    "class" => {
                        if node.layer() == Layer::Place {
                            return Err(QueryError::unsupported(format!(
                                "Place node {} has no class property",
                                node.symbol
                            )));
                        }
                        match value {
                            Value::Str(s) => Assignment::Class(id, s),
                            other => {
                                return Err(QueryError::type_mismatch(format!(
                                    "class must be a string, got {}",
                                    other.type_name()
                                )))
                            }
                        }
                    }
                    "center" => match value {
                        Value::Point(p) => Assignment::Center(id, p),
                        other => {
                            return Err(QueryError::type_mismatch(format!(
                                "center must be a point, got {}",
                                other.type_name()
                            )))
                        }
                    },
                    key => {
                        let prop = value.to_prop().map_err(|what| {
                            QueryError::type_mismatch(format!("cannot store a {what} in property `{key}`"))
                        })?;
                        Assignment::Extra(id, key.to_string(), prop)
                    }
                });
            }
        }
        Ok(out)
    }

    // ---- expressions ----

    fn node_property(&self, id: NodeId, key: &str) -> Result<Value, QueryError> {
        let n = self.graph.node_at(id);
        Ok(match key {
            "nodeSymbol" => Value::Str(n.symbol.to_string()),
            "class" => n.class.clone().map_or(Value::Null, Value::Str),
            "center" => Value::Point(n.center),
            _ => match n.extra_property(key) {
                Some(v) => Value::from_prop(v),
                None if self.known_props.contains(key) => Value::Null,
                None => return Err(self.unknown_property(key)),
            },
        })
    }

    fn eval(&self, e: &Expr, env: Env<'_>) -> Result<Value, QueryError> {
        Ok(match e {
            Expr::Null => Value::Null,
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Int(i) => Value::Int(*i),
            Expr::Float(x) => Value::Float(*x),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(self.eval(i, env)?);
                }
                Value::List(out)
            }
            Expr::Var(v) => env
                .lookup(v)
                .cloned()
                .ok_or_else(|| QueryError::unknown(format!("variable `{v}` is not defined")))?,
            Expr::Prop(inner, key) => match self.eval(inner, env)? {
                Value::Null => Value::Null,
                Value::Node(id) => self.node_property(id, key)?,
                Value::Point(p) => match key.as_str() {
                    "x" => Value::Float(p.x),
                    "y" => Value::Float(p.y),
                    "z" => Value::Float(p.z),
                    _ => return Err(QueryError::unknown(format!("points have only x, y and z, not `{key}`"))),
                },
                Value::Edge(_) => return Err(QueryError::unknown(format!("relationships have no property `{key}`"))),
                other => {
                    return Err(QueryError::type_mismatch(format!(
                        "cannot read property `{key}` of a {}",
                        other.type_name()
                    )))
                }
            },
            Expr::Not(inner) => opt_bool(truth(&self.eval(inner, env)?)?.map(|b| !b)),
            Expr::Neg(inner) => match self.eval(inner, env)? {
                Value::Null => Value::Null,
                Value::Int(i) => Value::Int(
                    i.checked_neg()
                        .ok_or_else(|| QueryError::type_mismatch("integer overflow"))?,
                ),
                Value::Float(x) => Value::Float(-x),
                other => {
                    return Err(QueryError::type_mismatch(format!(
                        "cannot negate a {}",
                        other.type_name()
                    )))
                }
            },
            Expr::Binary(op, l, r) => {
                let a = self.eval(l, env)?;
                let b = self.eval(r, env)?;
                binary(*op, a, b)?
            }
            Expr::Func(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env)?);
                }
                call(*f, vals)?
            }
            Expr::Point(fields) => {
                let mut c = [0.0; 3];
                for (k, fe) in fields {
                    let v = self.eval(fe, env)?;
                    let x = match v {
                        Value::Null => return Ok(Value::Null),
                        other => other.as_f64().ok_or_else(|| {
                            QueryError::type_mismatch(format!(
                                "point coordinate `{k}` must be a number, got {}",
                                other.type_name()
                            ))
                        })?,
                    };
                    let i = match k.as_str() {
                        "x" => 0,
                        "y" => 1,
                        _ => 2,
                    };
                    c[i] = x;
                }
                let p = Point3::new(c[0], c[1], c[2]);
                if !p.is_finite() {
                    return Err(QueryError::type_mismatch("point coordinates must be finite"));
                }
                Value::Point(p)
            }
            Expr::Agg { .. } => env
                .aggs
                .and_then(|m| m.get(&(e as *const Expr)))
                .cloned()
                .ok_or_else(|| {
                    QueryError::new(QueryErrorKind::Parse, format!("aggregate `{e}` is not allowed here"))
                })?,
        })
    }
}

type CompiledNodeRef<'p> = CompiledNode<'p>;
type Hop<'p> = (&'p RelPattern, Option<usize>, CompiledNodeRef<'p>);
type Path<'p> = (CompiledNodeRef<'p>, Vec<Hop<'p>>);

struct CompiledNode<'p> {
    pattern: &'p NodePattern,
    slot: Option<usize>,
}

fn collect_aggs<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match e {
        Expr::Agg { .. } => out.push(e),
        Expr::List(items) | Expr::Func(_, items) => items.iter().for_each(|i| collect_aggs(i, out)),
        Expr::Prop(i, _) | Expr::Not(i) | Expr::Neg(i) => collect_aggs(i, out),
        Expr::Binary(_, a, b) => {
            collect_aggs(a, out);
            collect_aggs(b, out);
        }
        Expr::Point(fields) => fields.iter().for_each(|(_, i)| collect_aggs(i, out)),
        _ => {}
    }
}

fn mismatch(op: &str, a: &Value, b: &Value) -> QueryError {
    QueryError::type_mismatch(format!("cannot apply {op} to {} and {}", a.type_name(), b.type_name()))
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, QueryError> {
    use Value as V;
    Ok(match op {
        BinOp::And => {
            let (x, y) = (truth(&a)?, truth(&b)?);
            match (x, y) {
                (Some(false), _) | (_, Some(false)) => V::Bool(false),
                (Some(true), Some(true)) => V::Bool(true),
                _ => V::Null,
            }
        }
        BinOp::Or => {
            let (x, y) = (truth(&a)?, truth(&b)?);
            match (x, y) {
                (Some(true), _) | (_, Some(true)) => V::Bool(true),
                (Some(false), Some(false)) => V::Bool(false),
                _ => V::Null,
            }
        }
        BinOp::Eq => V::Bool(a.equals(&b) == Some(true)),
        BinOp::Ne => V::Bool(a.equals(&b) == Some(false)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            if a.is_null() || b.is_null() {
                return Ok(V::Bool(false));
            }
            let ord = match (&a, &b) {
                (V::Str(x), V::Str(y)) => Some(x.cmp(y)),
                (V::Bool(x), V::Bool(y)) => Some(x.cmp(y)),
                (V::Int(x), V::Int(y)) => Some(x.cmp(y)),
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x.partial_cmp(&y),
                    _ => {
                        let sym = match op {
                            BinOp::Lt => "<",
                            BinOp::Le => "<=",
                            BinOp::Gt => ">",
                            _ => ">=",
                        };
                        return Err(mismatch(sym, &a, &b));
                    }
                },
            };
            let Some(ord) = ord else { return Ok(V::Bool(false)) };
            V::Bool(match op {
                BinOp::Lt => ord == Ordering::Less,
                BinOp::Le => ord != Ordering::Greater,
                BinOp::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            })
        }
        BinOp::In => match (&a, &b) {
            (_, V::Null) | (V::Null, _) => V::Bool(false),
            (_, V::List(items)) => V::Bool(items.iter().any(|i| a.equals(i) == Some(true))),
            _ => return Err(mismatch("IN", &a, &b)),
        },
        BinOp::Contains => match (&a, &b) {
            (V::Null, _) | (_, V::Null) => V::Bool(false),
            (V::Str(x), V::Str(y)) => V::Bool(x.contains(y.as_str())),
            _ => return Err(mismatch("CONTAINS", &a, &b)),
        },
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
            if a.is_null() || b.is_null() {
                return Ok(V::Null);
            }
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                _ => "/",
            };
            match (&a, &b) {
                (V::Int(x), V::Int(y)) => {
                    let r = match op {
                        BinOp::Add => x.checked_add(*y),
                        BinOp::Sub => x.checked_sub(*y),
                        BinOp::Mul => x.checked_mul(*y),
                        _ => {
                            if *y == 0 {
                                return Err(QueryError::type_mismatch("integer division by zero"));
                            }
                            x.checked_div(*y)
                        }
                    };
                    V::Int(r.ok_or_else(|| QueryError::type_mismatch("integer overflow"))?)
                }
                (V::Str(x), V::Str(y)) if op == BinOp::Add => V::Str(format!("{x}{y}")),
                (V::List(x), V::List(y)) if op == BinOp::Add => V::List(x.iter().chain(y).cloned().collect()),
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => V::Float(match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        BinOp::Mul => x * y,
                        _ => x / y,
                    }),
                    _ => return Err(mismatch(sym, &a, &b)),
                },
            }
        }
    })
}

fn call(f: Func, args: Vec<Value>) -> Result<Value, QueryError> {
    if args.iter().any(Value::is_null) {
        return Ok(Value::Null);
    }
    Ok(match (f, args.as_slice()) {
        (Func::Distance, [Value::Point(p), Value::Point(q)]) => Value::Float(p.distance(q)),
        (Func::Distance, [a, b]) => {
            return Err(QueryError::type_mismatch(format!(
                "point.distance expects two points, got {} and {}",
                a.type_name(),
                b.type_name()
            )))
        }
        (Func::Abs, [Value::Int(i)]) => Value::Int(
            i.checked_abs()
                .ok_or_else(|| QueryError::type_mismatch("integer overflow"))?,
        ),
        (Func::Abs, [Value::Float(x)]) => Value::Float(x.abs()),
        (Func::ToLower, [Value::Str(s)]) => Value::Str(s.to_lowercase()),
        (f, [a]) => {
            let name = if f == Func::Abs {
                "abs expects a number"
            } else {
                "toLower expects a string"
            };
            return Err(QueryError::type_mismatch(format!("{name}, got {}", a.type_name())));
        }
        _ => return Err(QueryError::type_mismatch("wrong number of arguments")),
    })
}
