//! Query syntax tree and its canonical text form.
//!
//! `Display` prints a single-line query that reparses to an identical tree.

use std::fmt::{self, Write};

use crate::scene_graph::{EdgeType, Layer};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    Match(MatchClause),
    With(Projection, Option<Expr>),
    Return(Projection),
    Set(Vec<SetItem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchClause {
    pub patterns: Vec<PathPattern>,
    pub where_: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub hops: Vec<(RelPattern, NodePattern)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<Layer>,
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelDirection {
    /// `-[]->`
    Right,
    /// `<-[]-`
    Left,
    /// `-[]-`
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub var: Option<String>,
    pub edge_type: Option<EdgeType>,
    pub direction: RelDirection,
    pub length: Option<VarLength>,
}

/// `*`, `*n`, `*m..n`, `*..n`, `*m..`; absent bounds take the defaults at execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLength {
    pub min: Option<u32>,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub distinct: bool,
    pub items: Vec<ProjectionItem>,
    pub order_by: Vec<SortItem>,
    pub skip: Option<u64>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl ProjectionItem {
    /// Column name: the alias, else the canonical text of the expression.
    pub fn column_name(&self) -> String {
        match &self.alias {
            Some(a) => a.clone(),
            None => self.expr.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortItem {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetItem {
    pub var: String,
    pub property: String,
    pub value: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    Contains,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn text(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::In => "IN",
            BinOp::Contains => "CONTAINS",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::In | BinOp::Contains => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

const NOT_PREC: u8 = 3;
const NEG_PREC: u8 = 7;
const ATOM_PREC: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Distance,
    Abs,
    ToLower,
}

impl Func {
    fn text(self) -> &'static str {
        match self {
            Func::Distance => "point.distance",
            Func::Abs => "abs",
            Func::ToLower => "toLower",
        }
    }

    pub(crate) fn arity(self) -> usize {
        match self {
            Func::Distance => 2,
            Func::Abs | Func::ToLower => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
    Collect,
}

impl AggFunc {
    fn text(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Collect => "collect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Expr>),
    Var(String),
    Prop(Box<Expr>, String),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Func(Func, Vec<Expr>),
    /// `point({x: .., y: .., z: ..})`
    Point(Vec<(String, Expr)>),
    /// `arg == None` is `count(*)`.
    Agg {
        func: AggFunc,
        distinct: bool,
        arg: Option<Box<Expr>>,
    },
}

impl Expr {
    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Agg { .. }));
        found
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::List(items) | Expr::Func(_, items) => items.iter().for_each(|e| e.walk(f)),
            Expr::Prop(e, _) | Expr::Not(e) | Expr::Neg(e) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Point(fields) => fields.iter().for_each(|(_, e)| e.walk(f)),
            Expr::Agg { arg: Some(a), .. } => a.walk(f),
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Not(_) => NOT_PREC,
            Expr::Neg(_) => NEG_PREC,
            Expr::Int(i) if *i < 0 => NEG_PREC,
            Expr::Float(x) if x.is_sign_negative() => NEG_PREC,
            _ => ATOM_PREC,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

pub(crate) fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn ident(name: &str) -> String {
    let plain = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !super::parser::is_reserved(name);
    if plain {
        name.to_string()
    } else {
        format!("`{name}`")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Null => f.write_str("null"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Float(x) => write!(f, "{x:?}"),
            Expr::Str(s) => f.write_str(&quote_str(s)),
            Expr::List(items) => {
                f.write_char('[')?;
                write_list(f, items)?;
                f.write_char(']')
            }
            Expr::Var(v) => f.write_str(&ident(v)),
            Expr::Prop(e, p) => {
                write_child(f, e, ATOM_PREC)?;
                write!(f, ".{}", ident(p))
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                write_child(f, e, NOT_PREC)
            }
            Expr::Neg(e) => {
                f.write_char('-')?;
                // keep `- -1` from printing as `--1`
                if matches!(**e, Expr::Neg(_) | Expr::Int(_) | Expr::Float(_)) || e.precedence() <= NEG_PREC {
                    write!(f, "({e})")
                } else {
                    write_child(f, e, NEG_PREC)
                }
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                // comparisons do not chain, so both sides need a tighter operator
                let left_min = if p == 4 { p + 1 } else { p };
                write_child(f, a, left_min)?;
                write!(f, " {} ", op.text())?;
                write_child(f, b, p + 1)
            }
            Expr::Func(func, args) => {
                write!(f, "{}(", func.text())?;
                write_list(f, args)?;
                f.write_char(')')
            }
            Expr::Point(fields) => {
                f.write_str("point(")?;
                write_map(f, fields)?;
                f.write_char(')')
            }
            Expr::Agg { func, distinct, arg } => {
                write!(f, "{}(", func.text())?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                match arg {
                    Some(a) => write!(f, "{a}")?,
                    None => f.write_char('*')?,
                }
                f.write_char(')')
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

fn write_map(f: &mut fmt::Formatter<'_>, fields: &[(String, Expr)]) -> fmt::Result {
    f.write_char('{')?;
    for (i, (k, v)) in fields.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}: {v}", ident(k))?;
    }
    f.write_char('}')
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('(')?;
        if let Some(v) = &self.var {
            f.write_str(&ident(v))?;
        }
        if let Some(l) = self.label {
            write!(f, ":{}", l.label())?;
        }
        if !self.props.is_empty() {
            if self.var.is_some() || self.label.is_some() {
                f.write_char(' ')?;
            }
            write_map(f, &self.props)?;
        }
        f.write_char(')')
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.direction == RelDirection::Left {
            f.write_char('<')?;
        }
        f.write_str("-[")?;
        if let Some(v) = &self.var {
            f.write_str(&ident(v))?;
        }
        if let Some(t) = self.edge_type {
            write!(f, ":{}", t.name())?;
        }
        if let Some(len) = self.length {
            f.write_char('*')?;
            match (len.min, len.max) {
                (None, None) => {}
                (Some(a), None) => write!(f, "{a}..")?,
                (None, Some(b)) => write!(f, "..{b}")?,
                (Some(a), Some(b)) => write!(f, "{a}..{b}")?,
            }
        }
        f.write_str("]-")?;
        if self.direction == RelDirection::Right {
            f.write_char('>')?;
        }
        Ok(())
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for (rel, node) in &self.hops {
            write!(f, "{rel}{node}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", item.expr)?;
            if let Some(a) = &item.alias {
                write!(f, " AS {}", ident(a))?;
            }
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            for (i, s) in self.order_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", s.expr)?;
                if s.descending {
                    f.write_str(" DESC")?;
                }
            }
        }
        if let Some(n) = self.skip {
            write!(f, " SKIP {n}")?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Match(m) => {
                f.write_str("MATCH ")?;
                for (i, p) in m.patterns.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                if let Some(w) = &m.where_ {
                    write!(f, " WHERE {w}")?;
                }
                Ok(())
            }
            Clause::With(p, w) => {
                write!(f, "WITH {p}")?;
                if let Some(w) = w {
                    write!(f, " WHERE {w}")?;
                }
                Ok(())
            }
            Clause::Return(p) => write!(f, "RETURN {p}"),
            Clause::Set(items) => {
                f.write_str("SET ")?;
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}.{} = {}", ident(&s.var), ident(&s.property), s.value)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_char(' ')?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Query {
    pub fn is_mutating(&self) -> bool {
        self.clauses.iter().any(|c| matches!(c, Clause::Set(_)))
    }
}
