//! Runs every criterion of the invariant suite once, in order, and prints a
//! PASS/FAIL line for each. Lines go straight to the stderr handle so they show
//! up even when the harness captures output.

use std::io::Write;

use zeroflow_core::suite::{run_all, total_elapsed, SuiteOptions};

fn emit(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

#[test]
fn invariant_suite() {
    let results = run_all(SuiteOptions::default(), |r| emit(&r.to_string()));
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    emit(&format!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        total_elapsed(&results).as_secs_f64()
    ));
    assert_eq!(results.len(), 13);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
