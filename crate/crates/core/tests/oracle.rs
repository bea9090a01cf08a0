//! Direct trust queries against the machine runtime, exhaustively.

#[path = "support/oracle.rs"]
mod support;

use std::time::Instant;

use support::compare;

#[test]
fn query_agrees_with_runtime_small() {
    let (cases, mismatches) = compare((1, 2, 1));
    assert!(cases > 0);
    assert_eq!(mismatches, 0);
}

#[test]
#[ignore = "exhaustive at (2,2,2); run by the acceptance suite"]
fn query_agrees_with_runtime_full() {
    let t = Instant::now();
    let (cases, mismatches) = compare((2, 2, 2));
    eprintln!("{cases} cases, {mismatches} mismatches, {:?}", t.elapsed());
    assert_eq!(mismatches, 0);
}
