//! Acceptance suite: one pass/fail line per criterion.
//!
//! Every criterion is exact (tolerance 0). Criterion 1 samples 10^4 triples
//! per non-exhaustive ring, criterion 2 needs at least 10^3 gauges and
//! criteria 3 and 6 run at least 100 inputs each; all with seed 2024.

use gaugeforge::bundles::{run_criteria, Options, CRITERIA};
use gaugeforge::report::Status;
use std::io::Write;
use std::time::Instant;

const SEED: u64 = 2024;
const BUDGET_SECS: u64 = 60;

#[test]
fn acceptance_criteria() {
    let ids: Vec<u32> = CRITERIA.iter().map(|(i, _)| *i).collect();
    let t = Instant::now();
    let results = run_criteria(&ids, SEED, Options { timings: true, ..Options::default() }).expect("criteria run");
    // Through the handle, not println!, so the lines survive output capture.
    let mut out = std::io::stderr();
    let mut failed = Vec::new();
    for (i, rep) in &results {
        let ms = rep.timing_ms.unwrap_or(0);
        let ok = rep.status == Status::Ok && ms <= BUDGET_SECS * 1000 && rep.is_well_formed();
        let line = if ok { "PASS" } else { "FAIL" };
        writeln!(out, "criterion {i:>2} {line} {:<36} status={:?} time={}ms", rep.name, rep.status, ms).unwrap();
        if !ok {
            writeln!(out, "{}", rep.to_table()).unwrap();
            failed.push(*i);
        }
    }
    writeln!(out, "total {} ms", t.elapsed().as_millis()).unwrap();
    assert_eq!(results.len(), 10);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
