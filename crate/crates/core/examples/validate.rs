//! Runs the built-in invariant suite and prints one line per check.

use lowmach::harness::validate::run_validation;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let report = run_validation(seed, |c| println!("{}", c.line()));
    println!("{} checks, {} failed", report.checks.len(), report.failures().count());
}
