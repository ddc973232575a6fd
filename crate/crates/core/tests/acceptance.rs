//! Acceptance run: the full `verify` suite at budget 1, reported as one line
//! per criterion. A criterion passes only when every one of its checks
//! passes; an inconclusive check at full budget counts as not attained.
//!
//! `ERBM_ACCEPTANCE_SEED` overrides the master seed (default 0).

use std::process::ExitCode;

use erbm::cli::verify::{verify, Status, Suite};

fn main() -> ExitCode {
    let seed = std::env::var("ERBM_ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let report = verify(Suite::Full, seed, 1.0);
    let mut all_pass = true;
    for criterion in 1..=16u8 {
        let checks: Vec<_> = report.checks.iter().filter(|c| c.criterion == criterion).collect();
        let pass = !checks.is_empty() && checks.iter().all(|c| c.status == Status::Pass);
        all_pass &= pass;
        let detail: Vec<String> = checks
            .iter()
            .map(|c| format!("{} {} ({:.3e} of tolerance, {:.1} s)", c.name, c.status.label(), c.measured, c.runtime))
            .collect();
        println!("criterion {criterion:>2}: {}  {}", if pass { "PASS" } else { "FAIL" }, detail.join("; "));
        for c in checks.iter().filter(|c| c.status != Status::Pass) {
            for p in &c.parts {
                println!("    {}: measured {:e}, tolerance {:e}", p.label, p.measured, p.tolerance);
            }
            if let Some(e) = &c.error {
                println!("    error: {e}");
            }
        }
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
