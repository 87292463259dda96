use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::error::{QueryError, QueryErrorKind, Span};
use super::lexer::{tokenize, Tok, Token};
use crate::scene_graph::{EdgeType, Layer};

const RESERVED: &[&str] = &[
    "MATCH",
    "WHERE",
    "RETURN",
    "WITH",
    "SET",
    "AS",
    "DISTINCT",
    "ORDER",
    "BY",
    "ASC",
    "ASCENDING",
    "DESC",
    "DESCENDING",
    "SKIP",
    "LIMIT",
    "AND",
    "OR",
    "NOT",
    "IN",
    "CONTAINS",
    "TRUE",
    "FALSE",
    "NULL",
    "OPTIONAL",
    "UNWIND",
    "CREATE",
    "DELETE",
    "DETACH",
    "MERGE",
    "CALL",
    "UNION",
    "REMOVE",
    "FOREACH",
    "CASE",
    "EXISTS",
    "STARTS",
    "ENDS",
    "IS",
    "XOR",
    "YIELD",
];

/// Clause keywords outside the supported subset.
const UNSUPPORTED_CLAUSES: &[&str] = &[
    "OPTIONAL", "UNWIND", "CREATE", "DELETE", "DETACH", "MERGE", "CALL", "UNION", "REMOVE", "FOREACH",
];

const SUPPORTED_FUNCTIONS: &str = "point.distance, point, abs, toLower, count, sum, avg, min, max, collect";

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Parse query text into a checked syntax tree.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let query = parse_unchecked(text)?;
    analyze(&query)?;
    Ok(query)
}

/// Syntax only, without scope checks.
pub(crate) fn parse_unchecked(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    Parser {
        text,
        toks: tokens,
        pos: 0,
    }
    .query()
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, QueryError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        Span::at(self.text, self.toks[self.pos].offset)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> QueryError {
        let found = self.peek().describe();
        let mut e = QueryError::new(QueryErrorKind::Parse, format!("unexpected {found}")).with_span(self.span());
        e.expected = expected.iter().map(|s| s.to_string()).collect();
        e
    }

    fn fail<T>(&self, kind: QueryErrorKind, msg: impl Into<String>) -> PResult<T> {
        Err(QueryError::new(kind, msg).with_span(self.span()))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident { name, quoted: false } if name.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&[&tok.describe()]))
        }
    }

    /// A non-keyword identifier (variables, aliases).
    fn name(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident { name, quoted } if quoted || !is_reserved(&name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.error(&[what])),
        }
    }

    /// Any identifier, keywords included (property keys, labels, types).
    fn any_name(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident { name, .. } => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn unsupported_keyword(&self) -> Option<QueryError> {
        if let Tok::Ident { name, quoted: false } = self.peek() {
            let upper = name.to_ascii_uppercase();
            if UNSUPPORTED_CLAUSES.contains(&upper.as_str()) {
                let what = if upper == "OPTIONAL" {
                    "OPTIONAL MATCH".to_string()
                } else {
                    upper
                };
                return Some(
                    QueryError::unsupported(format!(
                        "{what} is not supported; the query language is read-only apart from SET"
                    ))
                    .with_span(self.span()),
                );
            }
        }
        None
    }

    fn query(&mut self) -> PResult<Query> {
        let mut clauses = Vec::new();
        loop {
            if let Some(e) = self.unsupported_keyword() {
                return Err(e);
            }
            let first = clauses.is_empty();
            if self.at_keyword("MATCH") {
                self.bump();
                clauses.push(Clause::Match(self.match_body()?));
            } else if first {
                return Err(self.error(&["MATCH"]));
            } else if self.eat_keyword("WITH") {
                let proj = self.projection()?;
                let where_ = if self.eat_keyword("WHERE") {
                    Some(self.expr()?)
                } else {
                    None
                };
                clauses.push(Clause::With(proj, where_));
            } else if self.eat_keyword("RETURN") {
                clauses.push(Clause::Return(self.projection()?));
                break;
            } else if self.eat_keyword("SET") {
                clauses.push(Clause::Set(self.set_items()?));
                if let Some(e) = self.unsupported_keyword() {
                    return Err(e);
                }
                if self.eat_keyword("RETURN") {
                    clauses.push(Clause::Return(self.projection()?));
                }
                break;
            } else {
                return Err(self.error(&["MATCH", "WITH", "RETURN", "SET"]));
            }
        }
        self.eat(&Tok::Semicolon);
        if let Some(e) = self.unsupported_keyword() {
            return Err(e);
        }
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["end of query"]));
        }
        Ok(Query { clauses })
    }

    fn match_body(&mut self) -> PResult<MatchClause> {
        let mut patterns = vec![self.path()?];
        while self.eat(&Tok::Comma) {
            patterns.push(self.path()?);
        }
        let where_ = if self.eat_keyword("WHERE") {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(MatchClause { patterns, where_ })
    }

    fn path(&mut self) -> PResult<PathPattern> {
        if matches!(self.peek(), Tok::Ident { .. }) && *self.peek_at(1) == Tok::Eq {
            return self.fail(
                QueryErrorKind::UnsupportedFeature,
                "named paths (p = ...) are not supported",
            );
        }
        let start = self.node()?;
        let mut hops = Vec::new();
        while matches!(self.peek(), Tok::Minus | Tok::Lt) {
            let rel = self.rel()?;
            let node = self.node()?;
            hops.push((rel, node));
        }
        Ok(PathPattern { start, hops })
    }

    fn node(&mut self) -> PResult<NodePattern> {
        self.expect(Tok::LParen)?;
        let mut node = NodePattern::default();
        if matches!(self.peek(), Tok::Ident { .. }) {
            node.var = Some(self.name("variable")?);
        }
        if self.eat(&Tok::Colon) {
            let label = self.any_name("label")?;
            node.label = Some(Layer::from_label(&label).ok_or_else(|| {
                QueryError::unknown(format!(
                    "unknown label `{label}`; node labels are Object, MeshPlace, Place, Room"
                ))
                .with_span(self.span())
            })?);
            if *self.peek() == Tok::Colon {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    "multiple labels on one node are not supported",
                );
            }
        }
        if *self.peek() == Tok::LBrace {
            node.props = self.map()?;
        }
        self.expect(Tok::RParen)?;
        Ok(node)
    }

    fn rel(&mut self) -> PResult<RelPattern> {
        let left = self.eat(&Tok::Lt);
        self.expect(Tok::Minus)?;
        let mut rel = RelPattern {
            var: None,
            edge_type: None,
            direction: RelDirection::Both,
            length: None,
        };
        if self.eat(&Tok::LBracket) {
            if matches!(self.peek(), Tok::Ident { .. }) {
                rel.var = Some(self.name("variable")?);
            }
            if self.eat(&Tok::Colon) {
                let name = self.any_name("relationship type")?;
                rel.edge_type = Some(EdgeType::from_name(&name).ok_or_else(|| {
                    QueryError::unknown(format!(
                        "unknown relationship type `{name}`; types are CONTAINS, OBJECT_CONNECTED, PLACE_CONNECTED, MESH_PLACE_CONNECTED, ROOM_CONNECTED"
                    ))
                    .with_span(self.span())
                })?);
                if *self.peek() == Tok::Pipe {
                    return self.fail(
                        QueryErrorKind::UnsupportedFeature,
                        "alternative relationship types (A|B) are not supported",
                    );
                }
            }
            if self.eat(&Tok::Star) {
                rel.length = Some(self.var_length()?);
                if rel.var.is_some() {
                    return self.fail(
                        QueryErrorKind::UnsupportedFeature,
                        "binding a variable to a variable-length relationship is not supported",
                    );
                }
            }
            if *self.peek() == Tok::LBrace {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    "relationship property maps are not supported",
                );
            }
            self.expect(Tok::RBracket)?;
        }
        self.expect(Tok::Minus)?;
        let right = self.eat(&Tok::Gt);
        rel.direction = match (left, right) {
            (true, false) => RelDirection::Left,
            (false, true) => RelDirection::Right,
            (false, false) => RelDirection::Both,
            (true, true) => return self.fail(QueryErrorKind::Parse, "a relationship cannot point both ways"),
        };
        Ok(rel)
    }

    fn var_length(&mut self) -> PResult<VarLength> {
        let bound = |p: &mut Self| -> PResult<Option<u32>> {
            match p.peek().clone() {
                Tok::Int(i) => {
                    p.bump();
                    u32::try_from(i).map(Some).map_err(|_| {
                        QueryError::new(QueryErrorKind::DepthExceeded, format!("length bound {i} is too large"))
                    })
                }
                _ => Ok(None),
            }
        };
        let min = bound(self)?;
        let len = if self.eat(&Tok::DotDot) {
            VarLength { min, max: bound(self)? }
        } else {
            VarLength { min, max: min }
        };
        if len.min == Some(0) {
            return self.fail(
                QueryErrorKind::UnsupportedFeature,
                "zero-length relationships (*0) are not supported",
            );
        }
        if len.max == Some(0) {
            return self.fail(
                QueryErrorKind::UnsupportedFeature,
                "zero-length relationships (*..0) are not supported",
            );
        }
        if let (Some(a), Some(b)) = (len.min, len.max) {
            if a > b {
                return self.fail(
                    QueryErrorKind::Parse,
                    format!("invalid length range *{a}..{b}: minimum exceeds maximum"),
                );
            }
        }
        Ok(len)
    }

    fn map(&mut self) -> PResult<Vec<(String, Expr)>> {
        self.expect(Tok::LBrace)?;
        let mut out: Vec<(String, Expr)> = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            let key = self.any_name("property key")?;
            if out.iter().any(|(k, _)| *k == key) {
                return self.fail(QueryErrorKind::Parse, format!("duplicate key `{key}` in map"));
            }
            self.expect(Tok::Colon)?;
            let value = self.expr()?;
            out.push((key, value));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    fn projection(&mut self) -> PResult<Projection> {
        let distinct = self.eat_keyword("DISTINCT");
        if *self.peek() == Tok::Star {
            return self.fail(
                QueryErrorKind::UnsupportedFeature,
                "projecting * is not supported; list the items explicitly",
            );
        }
        let mut items = Vec::new();
        loop {
            let expr = self.expr()?;
            let alias = if self.eat_keyword("AS") {
                Some(self.name("alias")?)
            } else {
                None
            };
            items.push(ProjectionItem { expr, alias });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let mut order_by = Vec::new();
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_keyword("DESC") || self.eat_keyword("DESCENDING") {
                    true
                } else {
                    let _ = self.eat_keyword("ASC") || self.eat_keyword("ASCENDING");
                    false
                };
                order_by.push(SortItem { expr, descending });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let skip = if self.eat_keyword("SKIP") {
            Some(self.count_literal("SKIP")?)
        } else {
            None
        };
        let limit = if self.eat_keyword("LIMIT") {
            Some(self.count_literal("LIMIT")?)
        } else {
            None
        };
        Ok(Projection {
            distinct,
            items,
            order_by,
            skip,
            limit,
        })
    }

    fn count_literal(&mut self, what: &str) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Int(i) if i >= 0 => {
                self.bump();
                Ok(i as u64)
            }
            Tok::Dollar => self.fail(
                QueryErrorKind::UnsupportedFeature,
                "query parameters ($name) are not supported",
            ),
            _ => Err(self.error(&[&format!("non-negative integer after {what}")])),
        }
    }

    fn set_items(&mut self) -> PResult<Vec<SetItem>> {
        let mut items = Vec::new();
        loop {
            let var = self.name("variable")?;
            if *self.peek() != Tok::Dot {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    "only property assignments (SET n.key = value) are supported",
                );
            }
            self.bump();
            let property = self.any_name("property key")?;
            self.expect(Tok::Eq)?;
            let value = self.expr()?;
            items.push(SetItem { var, property, value });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(items)
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        loop {
            if self.eat_keyword("OR") {
                let rhs = self.and_expr()?;
                lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
            } else if self.at_keyword("XOR") {
                return self.fail(QueryErrorKind::UnsupportedFeature, "XOR is not supported");
            } else {
                return Ok(lhs);
            }
        }
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.eat_keyword("AND") {
            let rhs = self.not_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_keyword("NOT") {
            Ok(Expr::Not(Box::new(self.not_expr()?)))
        } else {
            self.comparison()
        }
    }

    fn comparison_op(&mut self) -> PResult<Option<BinOp>> {
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::RegexMatch => {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    "regular expression matching (=~) is not supported",
                )
            }
            _ if self.at_keyword("IN") => BinOp::In,
            _ if self.at_keyword("CONTAINS") => BinOp::Contains,
            _ if self.at_keyword("STARTS") || self.at_keyword("ENDS") => {
                let which = if self.at_keyword("STARTS") {
                    "STARTS WITH"
                } else {
                    "ENDS WITH"
                };
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    format!("{which} is not supported; use CONTAINS or equality"),
                );
            }
            _ if self.at_keyword("IS") => {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    "IS NULL / IS NOT NULL is not supported",
                )
            }
            _ => return Ok(None),
        };
        self.bump();
        Ok(Some(op))
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let Some(op) = self.comparison_op()? else {
            return Ok(lhs);
        };
        let rhs = self.additive()?;
        if self.comparison_op()?.is_some() {
            return self.fail(
                QueryErrorKind::UnsupportedFeature,
                "chained comparisons are not supported; combine them with AND",
            );
        }
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => {
                    return self.fail(
                        QueryErrorKind::UnsupportedFeature,
                        "the modulo operator % is not supported",
                    )
                }
                Tok::Caret => {
                    return self.fail(
                        QueryErrorKind::UnsupportedFeature,
                        "the power operator ^ is not supported",
                    )
                }
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            // fold a sign directly onto a numeric literal
            let folded = match self.peek().clone() {
                Tok::Int(i) => Some(Expr::Int(-i)),
                Tok::Float(x) => Some(Expr::Float(-x)),
                _ => None,
            };
            if let Some(lit) = folded {
                if !matches!(self.peek_at(1), Tok::Dot | Tok::LBracket) {
                    self.bump();
                    return Ok(lit);
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::Plus {
            return self.fail(QueryErrorKind::UnsupportedFeature, "unary + is not supported");
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let key = self.any_name("property key")?;
                    e = Expr::Prop(Box::new(e), key);
                }
                Tok::LBracket => {
                    return self.fail(
                        QueryErrorKind::UnsupportedFeature,
                        "list indexing and slicing are not supported",
                    )
                }
                _ => return Ok(e),
            }
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Expr::Float(x))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket)?;
                }
                Ok(Expr::List(items))
            }
            Tok::LBrace => self.fail(
                QueryErrorKind::UnsupportedFeature,
                "map literals are only supported inside point({x, y, z})",
            ),
            Tok::Dollar => self.fail(
                QueryErrorKind::UnsupportedFeature,
                "query parameters ($name) are not supported",
            ),
            Tok::Ident { name, quoted } => {
                if !quoted {
                    let upper = name.to_ascii_uppercase();
                    match upper.as_str() {
                        "TRUE" => {
                            self.bump();
                            return Ok(Expr::Bool(true));
                        }
                        "FALSE" => {
                            self.bump();
                            return Ok(Expr::Bool(false));
                        }
                        "NULL" => {
                            self.bump();
                            return Ok(Expr::Null);
                        }
                        "CASE" => {
                            return self.fail(QueryErrorKind::UnsupportedFeature, "CASE expressions are not supported")
                        }
                        "EXISTS" => return self.fail(QueryErrorKind::UnsupportedFeature, "EXISTS is not supported"),
                        _ => {}
                    }
                }
                // dotted function names: point.distance(...), apoc.coll.sum(...)
                let mut n = 1;
                while *self.peek_at(n) == Tok::Dot && matches!(self.peek_at(n + 1), Tok::Ident { .. }) {
                    n += 2;
                }
                if !quoted && *self.peek_at(n) == Tok::LParen {
                    let mut parts = Vec::new();
                    for _ in 0..n.div_ceil(2) {
                        if let Tok::Ident { name, .. } = self.bump() {
                            parts.push(name);
                        }
                        self.eat(&Tok::Dot);
                    }
                    return self.call(&parts.join("."));
                }
                if !quoted && is_reserved(&name) {
                    return Err(self.error(&["expression"]));
                }
                self.bump();
                Ok(Expr::Var(name))
            }
            _ => Err(self.error(&["expression"])),
        }
    }

    fn call(&mut self, name: &str) -> PResult<Expr> {
        let lower = name.to_ascii_lowercase();
        let agg = match lower.as_str() {
            "count" => Some(AggFunc::Count),
            "sum" => Some(AggFunc::Sum),
            "avg" => Some(AggFunc::Avg),
            "min" => Some(AggFunc::Min),
            "max" => Some(AggFunc::Max),
            "collect" => Some(AggFunc::Collect),
            _ => None,
        };
        if let Some(func) = agg {
            self.expect(Tok::LParen)?;
            if func == AggFunc::Count && self.eat(&Tok::Star) {
                self.expect(Tok::RParen)?;
                return Ok(Expr::Agg {
                    func,
                    distinct: false,
                    arg: None,
                });
            }
            let distinct = self.eat_keyword("DISTINCT");
            let arg = self.expr()?;
            if *self.peek() == Tok::Comma {
                return self.fail(QueryErrorKind::Parse, format!("{lower} takes exactly one argument"));
            }
            self.expect(Tok::RParen)?;
            return Ok(Expr::Agg {
                func,
                distinct,
                arg: Some(Box::new(arg)),
            });
        }
        let func = match lower.as_str() {
            "point.distance" => Func::Distance,
            "abs" => Func::Abs,
            "tolower" => Func::ToLower,
            "point" => {
                self.expect(Tok::LParen)?;
                let fields = self.map()?;
                self.expect(Tok::RParen)?;
                let mut keys: Vec<&str> = fields.iter().map(|(k, _)| k.as_str()).collect();
                keys.sort_unstable();
                if keys != ["x", "y", "z"] {
                    return self.fail(
                        QueryErrorKind::UnsupportedFeature,
                        "point() takes exactly the keys x, y and z (cartesian 3D); other coordinate systems are not supported",
                    );
                }
                return Ok(Expr::Point(fields));
            }
            "distance" => {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    "function `distance` is not supported; use point.distance(a, b)",
                )
            }
            _ if lower.starts_with("apoc.") => {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    format!("apoc functions are not supported (`{name}`); supported functions: {SUPPORTED_FUNCTIONS}"),
                )
            }
            _ => {
                return self.fail(
                    QueryErrorKind::UnsupportedFeature,
                    format!("function `{name}` is not supported; supported functions: {SUPPORTED_FUNCTIONS}"),
                )
            }
        };
        self.expect(Tok::LParen)?;
        if self.at_keyword("DISTINCT") {
            return self.fail(
                QueryErrorKind::Parse,
                "DISTINCT is only allowed inside aggregate functions",
            );
        }
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != func.arity() {
            return self.fail(
                QueryErrorKind::Parse,
                format!("{name} expects {} argument(s), got {}", func.arity(), args.len()),
            );
        }
        Ok(Expr::Func(func, args))
    }
}

// ---- static checks ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarKind {
    Node,
    Edge,
    Value,
}

/// Facts gathered by the static pass.
#[derive(Debug, Default)]
pub(crate) struct Analysis {
    /// Property keys read from node-typed expressions.
    pub node_props: BTreeSet<String>,
    /// Property keys written by SET.
    pub set_props: BTreeSet<String>,
}

type Scope = HashMap<String, VarKind>;

fn err(kind: QueryErrorKind, msg: impl Into<String>) -> QueryError {
    QueryError::new(kind, msg)
}

/// Scope and placement checks that do not depend on a graph.
pub(crate) fn analyze(q: &Query) -> Result<Analysis, QueryError> {
    let mut a = Analysis::default();
    let mut scope: Scope = HashMap::new();
    for clause in &q.clauses {
        match clause {
            Clause::Match(m) => {
                let before = scope.clone();
                for p in &m.patterns {
                    for node in std::iter::once(&p.start).chain(p.hops.iter().map(|(_, n)| n)) {
                        for (key, e) in &node.props {
                            a.node_props.insert(key.clone());
                            check_expr(e, &before, false, &mut a)?;
                        }
                        if let Some(v) = &node.var {
                            bind(&mut scope, v, VarKind::Node)?;
                        }
                    }
                    for (rel, _) in &p.hops {
                        if let Some(v) = &rel.var {
                            if scope.contains_key(v) {
                                return Err(
                                    if before.get(v) == Some(&VarKind::Edge) || scope.get(v) == Some(&VarKind::Edge) {
                                        err(
                                            QueryErrorKind::UnsupportedFeature,
                                            format!("relationship variable `{v}` is bound twice"),
                                        )
                                    } else {
                                        err(
                                            QueryErrorKind::TypeMismatch,
                                            format!("variable `{v}` is not a relationship"),
                                        )
                                    },
                                );
                            }
                            scope.insert(v.clone(), VarKind::Edge);
                        }
                    }
                }
                if let Some(w) = &m.where_ {
                    check_expr(w, &scope, false, &mut a)?;
                }
            }
            Clause::With(p, w) => {
                scope = check_projection(p, &scope, true, &mut a)?;
                if let Some(w) = w {
                    check_expr(w, &scope, false, &mut a)?;
                }
            }
            Clause::Return(p) => {
                check_projection(p, &scope, false, &mut a)?;
            }
            Clause::Set(items) => {
                for item in items {
                    match scope.get(&item.var) {
                        None => {
                            return Err(err(
                                QueryErrorKind::UnknownIdentifier,
                                format!("variable `{}` is not defined", item.var),
                            ))
                        }
                        Some(VarKind::Node) => {}
                        Some(_) => {
                            return Err(err(
                                QueryErrorKind::TypeMismatch,
                                format!("SET target `{}` is not a node", item.var),
                            ))
                        }
                    }
                    if item.property == "nodeSymbol" {
                        return Err(err(
                            QueryErrorKind::UnsupportedFeature,
                            "nodeSymbol is immutable and cannot be SET",
                        ));
                    }
                    a.set_props.insert(item.property.clone());
                    check_expr(&item.value, &scope, false, &mut a)?;
                }
            }
        }
    }
    Ok(a)
}

fn bind(scope: &mut Scope, v: &str, kind: VarKind) -> Result<(), QueryError> {
    match scope.get(v) {
        None => {
            scope.insert(v.to_string(), kind);
            Ok(())
        }
        Some(k) if *k == kind => Ok(()),
        Some(_) => Err(err(
            QueryErrorKind::TypeMismatch,
            format!("variable `{v}` is not a node"),
        )),
    }
}

fn kind_of(e: &Expr, scope: &Scope) -> VarKind {
    match e {
        Expr::Var(v) => scope.get(v).copied().unwrap_or(VarKind::Value),
        _ => VarKind::Value,
    }
}

fn check_projection(p: &Projection, scope: &Scope, is_with: bool, a: &mut Analysis) -> Result<Scope, QueryError> {
    let mut out: Scope = HashMap::new();
    let mut aggregating = false;
    for item in &p.items {
        check_expr(&item.expr, scope, true, a)?;
        aggregating |= item.expr.contains_aggregate();
        let name = match (&item.alias, &item.expr) {
            (Some(alias), _) => alias.clone(),
            (None, Expr::Var(v)) => v.clone(),
            (None, e) if is_with => {
                return Err(err(
                    QueryErrorKind::Parse,
                    format!("expression `{e}` in WITH must be aliased with AS"),
                ))
            }
            (None, e) => e.to_string(),
        };
        if out.insert(name.clone(), kind_of(&item.expr, scope)).is_some() {
            return Err(err(QueryErrorKind::Parse, format!("duplicate column name `{name}`")));
        }
    }
    let mut order_scope = out.clone();
    if !aggregating && !p.distinct {
        for (k, v) in scope {
            order_scope.entry(k.clone()).or_insert(*v);
        }
    }
    for s in &p.order_by {
        if p.items.iter().any(|i| i.expr == s.expr) {
            continue;
        }
        if s.expr.contains_aggregate() {
            return Err(err(
                QueryErrorKind::Parse,
                format!(
                    "ORDER BY `{}` uses an aggregate that is not among the projected items",
                    s.expr
                ),
            ));
        }
        check_expr(&s.expr, &order_scope, false, a)?;
    }
    Ok(out)
}

fn check_expr(e: &Expr, scope: &Scope, agg_allowed: bool, a: &mut Analysis) -> Result<(), QueryError> {
    match e {
        Expr::Var(v) => {
            if !scope.contains_key(v) {
                return Err(err(
                    QueryErrorKind::UnknownIdentifier,
                    format!("variable `{v}` is not defined"),
                ));
            }
        }
        Expr::Prop(inner, key) => {
            match kind_of(inner, scope) {
                VarKind::Node => {
                    a.node_props.insert(key.clone());
                }
                VarKind::Edge => {
                    return Err(err(
                        QueryErrorKind::UnknownIdentifier,
                        format!("relationships have no properties (`{inner}.{key}`)"),
                    ))
                }
                VarKind::Value => {}
            }
            check_expr(inner, scope, agg_allowed, a)?;
        }
        Expr::Agg { arg, .. } => {
            if !agg_allowed {
                return Err(err(
                    QueryErrorKind::Parse,
                    format!("aggregate `{e}` is only allowed in WITH or RETURN items"),
                ));
            }
            if let Some(arg) = arg {
                check_expr(arg, scope, false, a).map_err(|mut x| {
                    if x.message.starts_with("aggregate") {
                        x.message = format!("aggregates cannot be nested (`{e}`)");
                    }
                    x
                })?;
            }
        }
        Expr::List(items) | Expr::Func(_, items) => {
            for i in items {
                check_expr(i, scope, agg_allowed, a)?;
            }
        }
        Expr::Point(fields) => {
            for (_, i) in fields {
                check_expr(i, scope, agg_allowed, a)?;
            }
        }
        Expr::Not(i) | Expr::Neg(i) => check_expr(i, scope, agg_allowed, a)?,
        Expr::Binary(_, l, r) => {
            check_expr(l, scope, agg_allowed, a)?;
            check_expr(r, scope, agg_allowed, a)?;
        }
        Expr::Null | Expr::Bool(_) | Expr::Int(_) | Expr::Float(_) | Expr::Str(_) => {}
    }
    Ok(())
}
