//! Acceptance checks, one line of output per criterion. Runs as a plain
//! binary so each result prints even when an earlier one fails.

mod corpus;
mod fixtures;
mod oracle;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

/// Outcome detail on success, reason on failure.
pub type Outcome = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

type Criterion = (u8, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "parser fixture", fixtures::parser_fixture),
    (2, "register table arithmetic", fixtures::table_arithmetic),
    (3, "weight endpoint law", laws::endpoint_law),
    (4, "cancellation and sign invariance", laws::cancellation_and_sign),
    (5, "two-log fixture values", fixtures::two_log_values),
    (6, "brute-force oracle equivalence", oracle::oracle_equivalence),
    (7, "graph laws", laws::graph_laws),
    (8, "differential soundness", corpus::differential_soundness),
    (9, "end-to-end detection", corpus::end_to_end_detection),
    (10, "CLI determinism", corpus::cli_determinism),
];

fn main() {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in CRITERIA {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.2}s]"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {reason} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
