mod common;

use common::goals::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgg_core::goal::{canonical_dnf, dnf_equivalent, goals_equivalent, parse_goal_unchecked, to_dnf, GoalExpr};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dnf_preserves_truth_table(g in goal(12, 5)) {
        let d = to_dnf(&g).unwrap();
        let idx = index_atoms(&[&g]);
        for m in 0..1u32 << idx.len() {
            prop_assert_eq!(eval(&g, &idx, m), eval_dnf(&d, &idx, m));
        }
        // no contradictory term, no term contained in another
        for t in &d.terms {
            for w in t.windows(2) {
                prop_assert!(w[0].atom != w[1].atom);
            }
        }
        for (i, a) in d.terms.iter().enumerate() {
            for (j, b) in d.terms.iter().enumerate() {
                if i != j {
                    prop_assert!(!a.iter().all(|l| b.contains(l)));
                }
            }
        }
    }

    #[test]
    fn canonical_dnf_preserves_truth_table(g in goal(8, 4)) {
        let d = canonical_dnf(&g).unwrap();
        let idx = index_atoms(&[&g]);
        for m in 0..1u32 << idx.len() {
            prop_assert_eq!(eval(&g, &idx, m), eval_dnf(&d, &idx, m));
        }
    }

    #[test]
    fn equivalence_is_an_equivalence_relation(a in goal(3, 3), b in goal(3, 3), c in goal(3, 3)) {
        let eq = |x: &GoalExpr, y: &GoalExpr| goals_equivalent(x, y).unwrap();
        prop_assert!(eq(&a, &a));
        prop_assert_eq!(eq(&a, &b), eq(&b, &a));
        if eq(&a, &b) && eq(&b, &c) {
            prop_assert!(eq(&a, &c));
        }
        prop_assert_eq!(eq(&a, &b), brute_equivalent(&a, &b));
    }

    #[test]
    fn display_round_trips(g in goal(12, 5)) {
        prop_assert_eq!(parse_goal_unchecked(&g.to_string()).unwrap(), g);
    }
}

#[test]
fn dnf_path_agrees_with_truth_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x90a1);
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = goal(10, 4);
    let mut equal = 0;
    for i in 0..1000 {
        let a = strategy.new_tree(&mut runner).unwrap().current();
        let b = if i % 2 == 0 {
            rewrite(&a, &mut rng, 0)
        } else {
            strategy.new_tree(&mut runner).unwrap().current()
        };
        if index_atoms(&[&a, &b]).len() > 10 {
            continue;
        }
        let truth = goals_equivalent(&a, &b).unwrap();
        assert_eq!(truth, brute_equivalent(&a, &b), "{a} vs {b}");
        assert_eq!(dnf_equivalent(&a, &b).unwrap(), truth, "{a} vs {b}");
        equal += usize::from(truth);
    }
    assert!(equal >= 400, "only {equal} equivalent pairs generated");
}
