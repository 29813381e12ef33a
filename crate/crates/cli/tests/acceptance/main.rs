//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p segmodel-cli --test acceptance`. Passing criterion
//! numbers as arguments (e.g. `-- 2 5`) runs only those.

mod binary;
mod metrics;
mod planted;
mod query;
mod roundtrip;
mod svm;
mod vectors;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// A criterion check returns a short summary on success and the reason on
/// failure.
pub type Outcome = Result<String, String>;

struct Criterion {
    number: usize,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { number: 1, name: "metric oracles", limit: Some(Duration::from_secs(10)), run: metrics::check },
    Criterion { number: 2, name: "query engine equivalence", limit: Some(Duration::from_secs(30)), run: query::check },
    Criterion { number: 3, name: "vector invariants", limit: None, run: vectors::check },
    Criterion { number: 4, name: "svm optimality", limit: None, run: svm::check },
    Criterion { number: 5, name: "planted segment recovery", limit: Some(Duration::from_secs(60)), run: planted::recovery },
    Criterion { number: 6, name: "explanation recovery", limit: None, run: planted::explanation },
    Criterion { number: 7, name: "min-visit effect", limit: None, run: planted::min_visits },
    Criterion { number: 8, name: "ablation structure", limit: None, run: planted::ablation },
    Criterion { number: 9, name: "determinism and round trips", limit: None, run: roundtrip::check },
    Criterion { number: 10, name: "stream/batch and cli/http consistency", limit: None, run: binary::check },
];

/// Fails with `msg` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.number)) {
        ran += 1;
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => {
                Err(format!("took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
            }
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {} ({}): {detail} [{:.2}s]", c.number, c.name, elapsed.as_secs_f64()),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {} ({}): {reason} [{:.2}s]", c.number, c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
