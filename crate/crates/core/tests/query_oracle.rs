mod common;

use common::oracle::sweep;

#[test]
fn engine_matches_brute_force() {
    let stats = sweep(0x5eed_0f9a, 500, 20).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(stats.checked, 10_000);
    // the generator has to exercise both outcomes to mean anything
    assert!(
        stats.depth_exceeded > 50,
        "only {} depth-exceeded cases",
        stats.depth_exceeded
    );
    assert!(stats.nonempty > 2500, "only {} non-empty results", stats.nonempty);
}
