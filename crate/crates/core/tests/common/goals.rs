//! Goal generators and a truth-table evaluator independent of the library.
#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sgg_core::goal::{Atom, Dnf, GoalExpr};

pub fn atom(i: usize) -> GoalExpr {
    GoalExpr::Atom(Atom {
        predicate: "visited-object".into(),
        args: vec![format!("O{i}")],
    })
}

pub fn goal(max_atoms: usize, depth: u32) -> impl Strategy<Value = GoalExpr> {
    let leaf = (0..max_atoms).prop_map(atom);
    leaf.prop_recursive(depth, 48, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|g| GoalExpr::Not(Box::new(g))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(GoalExpr::And),
            prop::collection::vec(inner, 2..4).prop_map(GoalExpr::Or),
        ]
    })
}

pub fn index_atoms(goals: &[&GoalExpr]) -> BTreeMap<Atom, usize> {
    fn walk(g: &GoalExpr, out: &mut BTreeMap<Atom, usize>) {
        match g {
            GoalExpr::Atom(a) => {
                let n = out.len();
                out.entry(a.clone()).or_insert(n);
            }
            GoalExpr::Not(c) => walk(c, out),
            GoalExpr::And(cs) | GoalExpr::Or(cs) => cs.iter().for_each(|c| walk(c, out)),
        }
    }
    let mut out = BTreeMap::new();
    for g in goals {
        walk(g, &mut out);
    }
    out
}

pub fn eval(g: &GoalExpr, idx: &BTreeMap<Atom, usize>, mask: u32) -> bool {
    match g {
        GoalExpr::Atom(a) => mask >> idx[a] & 1 == 1,
        GoalExpr::Not(c) => !eval(c, idx, mask),
        GoalExpr::And(cs) => cs.iter().all(|c| eval(c, idx, mask)),
        GoalExpr::Or(cs) => cs.iter().any(|c| eval(c, idx, mask)),
    }
}

pub fn eval_dnf(d: &Dnf, idx: &BTreeMap<Atom, usize>, mask: u32) -> bool {
    d.terms
        .iter()
        .any(|t| t.iter().all(|l| (mask >> idx[&l.atom] & 1 == 1) == l.positive))
}

pub fn brute_equivalent(a: &GoalExpr, b: &GoalExpr) -> bool {
    let idx = index_atoms(&[a, b]);
    (0..1u32 << idx.len()).all(|m| eval(a, &idx, m) == eval(b, &idx, m))
}

/// Random rewrite that preserves meaning.
pub fn rewrite(g: &GoalExpr, rng: &mut ChaCha8Rng, depth: u32) -> GoalExpr {
    let g = match g {
        GoalExpr::Atom(_) => g.clone(),
        GoalExpr::Not(c) => GoalExpr::Not(Box::new(rewrite(c, rng, depth + 1))),
        GoalExpr::And(cs) | GoalExpr::Or(cs) => {
            let mut kids: Vec<GoalExpr> = cs.iter().map(|c| rewrite(c, rng, depth + 1)).collect();
            for i in (1..kids.len()).rev() {
                kids.swap(i, rng.random_range(0..=i));
            }
            if matches!(g, GoalExpr::And(_)) {
                GoalExpr::And(kids)
            } else {
                GoalExpr::Or(kids)
            }
        }
    };
    if depth > 4 {
        return g;
    }
    match (rng.random_range(0..6), g) {
        (0, g) => GoalExpr::Not(Box::new(GoalExpr::Not(Box::new(g)))),
        (1, GoalExpr::And(cs)) => GoalExpr::Not(Box::new(GoalExpr::Or(
            cs.into_iter().map(|c| GoalExpr::Not(Box::new(c))).collect(),
        ))),
        (2, GoalExpr::Or(cs)) => GoalExpr::Not(Box::new(GoalExpr::And(
            cs.into_iter().map(|c| GoalExpr::Not(Box::new(c))).collect(),
        ))),
        (3, g) => {
            // g == (or g (and g x))
            let extra = atom(rng.random_range(0..10));
            GoalExpr::Or(vec![g.clone(), GoalExpr::And(vec![g, extra])])
        }
        (4, GoalExpr::And(mut cs)) if cs.len() >= 2 => {
            // (and x (or y z) ...) -> (or (and x y ...) (and x z ...))
            if let GoalExpr::Or(alts) = cs[1].clone() {
                let rest: Vec<GoalExpr> = cs
                    .drain(..)
                    .enumerate()
                    .filter(|(i, _)| *i != 1)
                    .map(|(_, c)| c)
                    .collect();
                GoalExpr::Or(
                    alts.into_iter()
                        .map(|alt| {
                            let mut t = rest.clone();
                            t.push(alt);
                            GoalExpr::And(t)
                        })
                        .collect(),
                )
            } else {
                GoalExpr::And(cs)
            }
        }
        (5, g) => {
            // g == (or (and g x) (and g (not x)))
            let x = atom(rng.random_range(0..10));
            GoalExpr::Or(vec![
                GoalExpr::And(vec![g.clone(), x.clone()]),
                GoalExpr::And(vec![g, GoalExpr::Not(Box::new(x))]),
            ])
        }
        (_, g) => g,
    }
}
