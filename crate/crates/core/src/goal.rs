//! Grounded PDDL goals: s-expression parsing, disjunctive normal form and
//! logical equivalence.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Deserialize;

use crate::par::{self, Parallelism};
use crate::scene_graph::{Layer, PropertyGraph};

pub const DEFAULT_TERM_LIMIT: usize = 100_000;
/// Largest atom count decided by enumerating assignments.
pub const TRUTH_TABLE_MAX_ATOMS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GoalError {
    #[error("goal parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("goal schema error in {atom}: {message}")]
    Schema { atom: String, message: String },
    #[error("DNF expansion exceeded {limit} terms")]
    Blowup { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: String,
    /// Allowed layers for each argument position.
    pub args: Vec<Vec<Layer>>,
}

impl PredicateSchema {
    fn new(name: &str, args: &[&[Layer]]) -> Self {
        PredicateSchema {
            name: name.to_string(),
            args: args.iter().map(|a| a.to_vec()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schemas {
    preds: Vec<PredicateSchema>,
}

impl Default for Schemas {
    fn default() -> Self {
        use Layer::*;
        let place: &[Layer] = &[Place, MeshPlace];
        Schemas {
            preds: vec![
                PredicateSchema::new("visited-place", &[place]),
                PredicateSchema::new("at-place", &[place]),
                PredicateSchema::new("visited-object", &[&[Object]]),
                PredicateSchema::new("at-object", &[&[Object]]),
                PredicateSchema::new("visited-room", &[&[Room]]),
                PredicateSchema::new("in-room", &[&[Room]]),
                PredicateSchema::new("safe", &[&[Object]]),
                PredicateSchema::new("holding", &[&[Object]]),
                PredicateSchema::new("object-in-place", &[&[Object], place]),
            ],
        }
    }
}

impl Schemas {
    pub fn new(preds: Vec<PredicateSchema>) -> Result<Self, String> {
        let mut seen = BTreeSet::new();
        for p in &preds {
            let name = p.name.to_ascii_lowercase();
            if !seen.insert(name.clone()) {
                return Err(format!("duplicate predicate `{name}`"));
            }
            if !(1..=2).contains(&p.arity()) {
                return Err(format!("predicate `{name}` has arity {}, expected 1 or 2", p.arity()));
            }
            if p.args.iter().any(|a| a.is_empty()) {
                return Err(format!("predicate `{name}` has an argument with no allowed layer"));
            }
        }
        Ok(Schemas {
            preds: preds
                .into_iter()
                .map(|mut p| {
                    p.name = p.name.to_ascii_lowercase();
                    p
                })
                .collect(),
        })
    }

    /// JSON list of `{"name": ..., "args": [["Place", "MeshPlace"], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Raw {
            name: String,
            args: Vec<Vec<String>>,
        }
        let raw: Vec<Raw> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut preds = Vec::with_capacity(raw.len());
        for r in raw {
            let args = r
                .args
                .iter()
                .map(|alts| {
                    alts.iter()
                        .map(|l| Layer::from_label(l).ok_or_else(|| format!("unknown layer `{l}` in `{}`", r.name)))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            preds.push(PredicateSchema { name: r.name, args });
        }
        Schemas::new(preds)
    }

    pub fn get(&self, name: &str) -> Option<&PredicateSchema> {
        self.preds.iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredicateSchema> {
        self.preds.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    /// Lowercased predicate name.
    pub predicate: String,
    pub args: Vec<String>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalExpr {
    Atom(Atom),
    Not(Box<GoalExpr>),
    And(Vec<GoalExpr>),
    Or(Vec<GoalExpr>),
}

impl GoalExpr {
    pub fn atoms(&self) -> BTreeSet<&Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a Atom>) {
        match self {
            GoalExpr::Atom(a) => {
                out.insert(a);
            }
            GoalExpr::Not(c) => c.collect_atoms(out),
            GoalExpr::And(cs) | GoalExpr::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
        }
    }

    /// Evaluate under an assignment of atoms to truth values.
    pub fn eval(&self, truth: &dyn Fn(&Atom) -> bool) -> bool {
        match self {
            GoalExpr::Atom(a) => truth(a),
            GoalExpr::Not(c) => !c.eval(truth),
            GoalExpr::And(cs) => cs.iter().all(|c| c.eval(truth)),
            GoalExpr::Or(cs) => cs.iter().any(|c| c.eval(truth)),
        }
    }
}

impl fmt::Display for GoalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, cs: &[GoalExpr]| {
            write!(f, "({head}")?;
            for c in cs {
                write!(f, " {c}")?;
            }
            f.write_str(")")
        };
        match self {
            GoalExpr::Atom(a) => a.fmt(f),
            GoalExpr::Not(c) => write!(f, "(not {c})"),
            GoalExpr::And(cs) => list(f, "and", cs),
            GoalExpr::Or(cs) => list(f, "or", cs),
        }
    }
}

/// Parse without checking predicates against a schema.
pub fn parse_goal_unchecked(text: &str) -> Result<GoalExpr, GoalError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let expr = parse_expr(&tokens, &mut pos, text.len())?;
    if let Some(t) = tokens.get(pos) {
        return Err(GoalError::Parse {
            offset: t.offset,
            message: "trailing input after goal".into(),
        });
    }
    Ok(expr)
}

pub fn parse_goal(text: &str, schemas: &Schemas) -> Result<GoalExpr, GoalError> {
    let expr = parse_goal_unchecked(text)?;
    validate(&expr, schemas)?;
    Ok(expr)
}

fn validate(expr: &GoalExpr, schemas: &Schemas) -> Result<(), GoalError> {
    match expr {
        GoalExpr::Atom(a) => {
            let Some(schema) = schemas.get(&a.predicate) else {
                return Err(GoalError::Schema {
                    atom: a.to_string(),
                    message: format!("unknown predicate `{}`", a.predicate),
                });
            };
            if schema.arity() != a.args.len() {
                let plural = if schema.arity() == 1 { "" } else { "s" };
                return Err(GoalError::Schema {
                    atom: a.to_string(),
                    message: format!(
                        "`{}` takes {} argument{plural}, got {}",
                        schema.name,
                        schema.arity(),
                        a.args.len()
                    ),
                });
            }
            Ok(())
        }
        GoalExpr::Not(c) => validate(c, schemas),
        GoalExpr::And(cs) | GoalExpr::Or(cs) => cs.iter().try_for_each(|c| validate(c, schemas)),
    }
}

#[derive(Debug)]
enum Tok<'a> {
    Open,
    Close,
    Sym(&'a str),
}

#[derive(Debug)]
struct Token<'a> {
    tok: Tok<'a>,
    offset: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' || c == ')' {
            chars.next();
            out.push(Token {
                tok: if c == '(' { Tok::Open } else { Tok::Close },
                offset: i,
            });
        } else {
            let mut end = text.len();
            while let Some(&(j, d)) = chars.peek() {
                if d.is_whitespace() || d == '(' || d == ')' {
                    end = j;
                    break;
                }
                chars.next();
            }
            out.push(Token {
                tok: Tok::Sym(&text[i..end]),
                offset: i,
            });
        }
    }
    out
}

fn parse_expr(tokens: &[Token<'_>], pos: &mut usize, end: usize) -> Result<GoalExpr, GoalError> {
    let err = |offset: usize, message: &str| GoalError::Parse {
        offset,
        message: message.to_string(),
    };
    let open = match tokens.get(*pos) {
        Some(Token { tok: Tok::Open, offset }) => *offset,
        Some(t) => return Err(err(t.offset, "expected `(`")),
        None => return Err(err(end, "unexpected end of input")),
    };
    *pos += 1;
    let head = match tokens.get(*pos) {
        Some(Token { tok: Tok::Sym(s), .. }) => *s,
        Some(t) => return Err(err(t.offset, "expected a predicate or connective name")),
        None => return Err(err(end, "unbalanced parentheses")),
    };
    *pos += 1;
    let connective = head.to_ascii_lowercase();
    let expr = match connective.as_str() {
        "and" | "or" | "not" => {
            let mut children = Vec::new();
            loop {
                match tokens.get(*pos) {
                    Some(Token { tok: Tok::Close, .. }) => break,
                    Some(_) => children.push(parse_expr(tokens, pos, end)?),
                    None => return Err(err(end, "unbalanced parentheses")),
                }
            }
            if connective == "not" {
                if children.len() != 1 {
                    return Err(err(open, "`not` takes exactly one operand"));
                }
                GoalExpr::Not(Box::new(children.pop().unwrap()))
            } else if children.is_empty() {
                return Err(err(open, &format!("`{connective}` needs at least one operand")));
            } else if children.len() == 1 {
                children.pop().unwrap()
            } else if connective == "and" {
                GoalExpr::And(children)
            } else {
                GoalExpr::Or(children)
            }
        }
        _ => {
            let mut args = Vec::new();
            loop {
                match tokens.get(*pos) {
                    Some(Token { tok: Tok::Close, .. }) => break,
                    Some(Token { tok: Tok::Sym(s), .. }) => {
                        args.push(s.to_string());
                        *pos += 1;
                    }
                    Some(t) => return Err(err(t.offset, "atom arguments must be symbols")),
                    None => return Err(err(end, "unbalanced parentheses")),
                }
            }
            GoalExpr::Atom(Atom {
                predicate: connective,
                args,
            })
        }
    };
    *pos += 1;
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

/// Disjunction of conjunctive terms. Terms and the literals inside them are
/// kept sorted, so two forms over the same terms compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dnf {
    pub terms: Vec<Vec<Literal>>,
}

impl Dnf {
    pub fn eval(&self, truth: &dyn Fn(&Atom) -> bool) -> bool {
        self.terms
            .iter()
            .any(|t| t.iter().all(|l| truth(&l.atom) == l.positive))
    }
}

impl fmt::Display for Dnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |t: &[Literal]| {
            let lits: Vec<String> = t
                .iter()
                .map(|l| {
                    if l.positive {
                        l.atom.to_string()
                    } else {
                        format!("(not {})", l.atom)
                    }
                })
                .collect();
            if lits.len() == 1 {
                lits.into_iter().next().unwrap()
            } else {
                format!("(and {})", lits.join(" "))
            }
        };
        match self.terms.len() {
            0 => f.write_str("(or)"),
            1 if self.terms[0].is_empty() => f.write_str("(and)"),
            1 => f.write_str(&term(&self.terms[0])),
            _ => {
                let ts: Vec<String> = self.terms.iter().map(|t| term(t)).collect();
                write!(f, "(or {})", ts.join(" "))
            }
        }
    }
}

/// Literal code: atom index * 2, plus 1 when negated.
type Term = Vec<u32>;

struct Interner<'a> {
    atoms: Vec<&'a Atom>,
    index: HashMap<&'a Atom, u32>,
}

impl<'a> Interner<'a> {
    fn new(goals: &[&'a GoalExpr]) -> Self {
        let mut all = BTreeSet::new();
        for g in goals {
            g.collect_atoms(&mut all);
        }
        let atoms: Vec<&Atom> = all.into_iter().collect();
        let index = atoms.iter().enumerate().map(|(i, a)| (*a, i as u32)).collect();
        Interner { atoms, index }
    }
}

pub fn to_dnf(goal: &GoalExpr) -> Result<Dnf, GoalError> {
    to_dnf_with_limit(goal, DEFAULT_TERM_LIMIT)
}

pub fn to_dnf_with_limit(goal: &GoalExpr, limit: usize) -> Result<Dnf, GoalError> {
    let interner = Interner::new(&[goal]);
    let terms = dnf_terms(goal, &interner, true, limit)?;
    Ok(export(&terms, &interner))
}

fn export(terms: &[Term], interner: &Interner<'_>) -> Dnf {
    let mut out: Vec<Vec<Literal>> = terms
        .iter()
        .map(|t| {
            t.iter()
                .map(|&code| Literal {
                    atom: interner.atoms[(code >> 1) as usize].clone(),
                    positive: code & 1 == 0,
                })
                .collect()
        })
        .collect();
    out.sort();
    Dnf { terms: out }
}

/// Terms of `goal` (or of its negation when `positive` is false), with
/// negations pushed inward on the fly.
fn dnf_terms(goal: &GoalExpr, interner: &Interner<'_>, positive: bool, limit: usize) -> Result<Vec<Term>, GoalError> {
    match goal {
        GoalExpr::Atom(a) => {
            let idx = interner.index[a];
            Ok(vec![vec![idx * 2 + u32::from(!positive)]])
        }
        GoalExpr::Not(c) => dnf_terms(c, interner, !positive, limit),
        GoalExpr::And(cs) | GoalExpr::Or(cs) => {
            let conjunctive = matches!(goal, GoalExpr::And(_)) == positive;
            let mut acc: Option<Vec<Term>> = None;
            for c in cs {
                let next = dnf_terms(c, interner, positive, limit)?;
                acc = Some(match acc {
                    None => next,
                    Some(prev) if conjunctive => product(&prev, &next, limit)?,
                    Some(mut prev) => {
                        prev.extend(next);
                        if prev.len() > limit {
                            return Err(GoalError::Blowup { limit });
                        }
                        absorb(prev)
                    }
                });
            }
            Ok(acc.unwrap_or_default())
        }
    }
}

fn product(a: &[Term], b: &[Term], limit: usize) -> Result<Vec<Term>, GoalError> {
    if a.len().saturating_mul(b.len()) > limit {
        return Err(GoalError::Blowup { limit });
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            if let Some(t) = merge(x, y) {
                out.push(t);
            }
        }
    }
    Ok(absorb(out))
}

/// Union of two sorted terms, or `None` when the result is contradictory.
fn merge(x: &[u32], y: &[u32]) -> Option<Term> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    out.extend_from_slice(x);
    out.extend_from_slice(y);
    out.sort_unstable();
    out.dedup();
    if out.windows(2).any(|w| w[0] >> 1 == w[1] >> 1) {
        return None;
    }
    Some(out)
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Drop duplicate terms and terms that contain another term.
fn absorb(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    terms.dedup();
    let mut kept: Vec<Term> = Vec::with_capacity(terms.len());
    // kept[..shorter] holds the kept terms strictly shorter than the current one;
    // distinct terms of equal length cannot contain each other.
    let mut shorter = 0;
    for t in terms {
        while shorter < kept.len() && kept[shorter].len() < t.len() {
            shorter += 1;
        }
        if !kept[..shorter].iter().any(|k| is_subset(k, &t)) {
            kept.push(t);
        }
    }
    kept
}

/// Blake canonical form (all prime implicants) by iterated consensus.
fn prime_implicants(mut terms: Vec<Term>, limit: usize) -> Result<Vec<Term>, GoalError> {
    'outer: loop {
        for i in 0..terms.len() {
            for j in (i + 1)..terms.len() {
                let Some(c) = consensus(&terms[i], &terms[j]) else {
                    continue;
                };
                if terms.iter().any(|t| is_subset(t, &c)) {
                    continue;
                }
                terms.retain(|t| !is_subset(&c, t));
                terms.push(c);
                if terms.len() > limit {
                    return Err(GoalError::Blowup { limit });
                }
                continue 'outer;
            }
        }
        return Ok(terms);
    }
}

/// Consensus of two terms that clash on exactly one atom.
fn consensus(x: &[u32], y: &[u32]) -> Option<Term> {
    let mut clash = None;
    for a in x {
        if y.contains(&(a ^ 1)) {
            if clash.is_some() {
                return None;
            }
            clash = Some(a >> 1);
        }
    }
    let atom = clash?;
    let mut out: Term = x.iter().chain(y).copied().filter(|l| l >> 1 != atom).collect();
    out.sort_unstable();
    out.dedup();
    Some(out)
}

/// Canonical DNF: every prime implicant, sorted. Two goals have the same
/// canonical DNF exactly when they are logically equivalent.
pub fn canonical_dnf(goal: &GoalExpr) -> Result<Dnf, GoalError> {
    let interner = Interner::new(&[goal]);
    let terms = dnf_terms(goal, &interner, true, DEFAULT_TERM_LIMIT)?;
    let primes = prime_implicants(terms, DEFAULT_TERM_LIMIT)?;
    Ok(export(&primes, &interner))
}

pub fn goals_equivalent(a: &GoalExpr, b: &GoalExpr) -> Result<bool, GoalError> {
    goals_equivalent_with(a, b, Parallelism::default())
}

pub fn goals_equivalent_with(a: &GoalExpr, b: &GoalExpr, mode: Parallelism) -> Result<bool, GoalError> {
    let interner = Interner::new(&[a, b]);
    if interner.atoms.len() <= TRUTH_TABLE_MAX_ATOMS {
        Ok(truth_tables_agree(a, b, &interner, mode))
    } else {
        dnf_equivalent(a, b)
    }
}

/// Equivalence through canonical DNF, regardless of atom count.
pub fn dnf_equivalent(a: &GoalExpr, b: &GoalExpr) -> Result<bool, GoalError> {
    Ok(canonical_dnf(a)? == canonical_dnf(b)?)
}

enum Compiled {
    Var(u32),
    Not(Box<Compiled>),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
}

impl Compiled {
    fn new(g: &GoalExpr, interner: &Interner<'_>) -> Self {
        match g {
            GoalExpr::Atom(a) => Compiled::Var(interner.index[a]),
            GoalExpr::Not(c) => Compiled::Not(Box::new(Compiled::new(c, interner))),
            GoalExpr::And(cs) => Compiled::And(cs.iter().map(|c| Compiled::new(c, interner)).collect()),
            GoalExpr::Or(cs) => Compiled::Or(cs.iter().map(|c| Compiled::new(c, interner)).collect()),
        }
    }

    fn eval(&self, mask: u64) -> bool {
        match self {
            Compiled::Var(i) => mask >> i & 1 == 1,
            Compiled::Not(c) => !c.eval(mask),
            Compiled::And(cs) => cs.iter().all(|c| c.eval(mask)),
            Compiled::Or(cs) => cs.iter().any(|c| c.eval(mask)),
        }
    }
}

fn truth_tables_agree(a: &GoalExpr, b: &GoalExpr, interner: &Interner<'_>, mode: Parallelism) -> bool {
    let ca = Compiled::new(a, interner);
    let cb = Compiled::new(b, interner);
    let rows = 1u64 << interner.atoms.len();
    par::all_indices(mode, rows, |m| ca.eval(m) == cb.eval(m))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundingIssue {
    pub atom: Atom,
    pub symbol: String,
    pub message: String,
}

impl fmt::Display for GroundingIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.atom, self.message)
    }
}

pub fn check_grounding(goal: &GoalExpr, graph: &PropertyGraph) -> Vec<GroundingIssue> {
    check_grounding_with(goal, graph, &Schemas::default())
}

/// One issue per argument that is missing from the graph or sits on a layer
/// the predicate does not accept. Atoms without a schema are skipped.
pub fn check_grounding_with(goal: &GoalExpr, graph: &PropertyGraph, schemas: &Schemas) -> Vec<GroundingIssue> {
    let mut issues = Vec::new();
    for atom in goal.atoms() {
        let Some(schema) = schemas.get(&atom.predicate) else {
            continue;
        };
        for (arg, allowed) in atom.args.iter().zip(&schema.args) {
            let message = match graph.node_by_text(arg) {
                None => format!("{arg} not in graph"),
                Some(node) if !allowed.contains(&node.layer()) => {
                    let expected: Vec<&str> = allowed.iter().map(|l| l.label()).collect();
                    format!(
                        "{arg} is a {}, expected {}",
                        node.layer().label(),
                        expected.join(" or ")
                    )
                }
                Some(_) => continue,
            };
            issues.push(GroundingIssue {
                atom: atom.clone(),
                symbol: arg.clone(),
                message,
            });
        }
    }
    issues
}
