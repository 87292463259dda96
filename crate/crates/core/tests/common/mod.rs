//! Fixture helpers shared by integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod goals;
pub mod oracle;

use std::collections::BTreeMap;

use sgg_core::agent::{Mode, ScriptEntry, Scripts, Task};
use sgg_core::answer::{parse_sldp, render_sldp, SldpValue};
use sgg_core::eval::{load_dataset, EvalCase};
use sgg_core::goal::{parse_goal_unchecked, GoalExpr};
use sgg_core::scene_graph::{load_graph_file, PropertyGraph};

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

pub fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

pub fn example_graph() -> PropertyGraph {
    load_graph_file(fixture("example_graph.json")).unwrap()
}

/// The two reconstructed dataset graphs keyed by the ids cases use.
pub fn dataset_graphs() -> BTreeMap<String, PropertyGraph> {
    ["large", "small"]
        .into_iter()
        .map(|id| {
            (
                id.to_string(),
                load_graph_file(fixture(&format!("{id}_graph.json"))).unwrap(),
            )
        })
        .collect()
}

pub fn dataset_cases() -> Vec<EvalCase> {
    load_dataset(fixture("example_dataset.jsonl")).unwrap()
}

pub const PROBE_QUERY: &str = "MATCH (n) RETURN count(*)";

/// Per-case scripts answering `answers[id]` through `mode`'s contract.
pub fn answer_scripts(answers: &BTreeMap<String, String>, mode: Mode) -> Scripts {
    let scripts = answers
        .iter()
        .map(|(id, a)| {
            let reply = ScriptEntry::Text(format!("<answer>{a}</answer>"));
            let entries = match mode {
                Mode::Single => vec![ScriptEntry::ToolCall(PROBE_QUERY.into()), reply],
                _ => vec![reply],
            };
            (id.clone(), entries)
        })
        .collect();
    Scripts::PerCase(scripts)
}

pub fn gold_answers(cases: &[EvalCase]) -> BTreeMap<String, String> {
    cases.iter().map(|c| (c.id.clone(), c.gold.clone())).collect()
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('O' | 'P' | 'p' | 'R')) && s.len() > 1 && chars.all(|c| c.is_ascii_digit())
}

fn next_symbol(s: &str) -> String {
    let n: u64 = s[1..].parse().unwrap();
    format!("{}{}", &s[..1], n + 1)
}

/// Change the first leaf: node symbols move to the next index, other
/// strings get a prefix, numbers and the x of points shift by 0.02.
fn perturb_value(v: &mut SldpValue) -> bool {
    match v {
        SldpValue::Number(x) => {
            *x += 0.02;
            true
        }
        SldpValue::Point(p) => {
            p[0] += 0.02;
            true
        }
        SldpValue::Str(s) => {
            *s = if is_symbol(s) {
                next_symbol(s)
            } else {
                format!("not{s}")
            };
            true
        }
        SldpValue::List(items) | SldpValue::Set(items) => items.iter_mut().any(perturb_value),
        SldpValue::Dict(map) => map.values_mut().any(perturb_value),
    }
}

fn swap_first_symbol(goal: &mut GoalExpr) -> bool {
    match goal {
        GoalExpr::Atom(a) => match a.args.iter_mut().find(|s| is_symbol(s)) {
            Some(s) => {
                *s = next_symbol(s);
                true
            }
            None => false,
        },
        GoalExpr::Not(g) => swap_first_symbol(g),
        GoalExpr::And(gs) | GoalExpr::Or(gs) => gs.iter_mut().any(swap_first_symbol),
    }
}

/// A wrong answer derived from the gold: a dropped disjunct for or-goals, a
/// symbol swap for other goals and for ids, +0.02 for numbers and points.
pub fn perturb(case: &EvalCase) -> String {
    match case.task {
        Task::Qa => {
            let mut v = parse_sldp(&case.gold).unwrap();
            assert!(perturb_value(&mut v), "nothing to perturb in {}", case.id);
            render_sldp(&v)
        }
        Task::Pddl => {
            let mut g = parse_goal_unchecked(&case.gold).unwrap();
            if let GoalExpr::Or(gs) = &mut g {
                gs.pop();
                if gs.len() == 1 {
                    g = gs.pop().unwrap();
                }
            } else {
                assert!(swap_first_symbol(&mut g), "no symbol in {}", case.id);
            }
            g.to_string()
        }
    }
}
