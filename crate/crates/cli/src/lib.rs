//! Scenario runner: loads a JSON scenario, runs the named experiment and writes
//! CSV artifacts plus a checksummed manifest.

pub mod error;
pub mod experiments;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use error::{CliError, CliResult};
use experiments::GoldenCheck;
use scenario::Scenario;

/// Runs a scenario and writes its outputs to `out` (default: the scenario's `output_dir`).
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let outcome = experiments::run(s)?;
    output::write(out.unwrap_or(&s.output_dir), s, &outcome)
}

pub fn verify_scenario(s: &Scenario) -> CliResult<Vec<GoldenCheck>> {
    experiments::goldens(s)
}

/// Fixed-width pass/fail table of golden checks.
pub fn golden_table(checks: &[GoldenCheck]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
    let mut s = format!("{:<6} {:<width$} {:>24} {:>24} {:>10}\n", "status", "check", "value", "expected", "tolerance");
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let tol = if c.relative { format!("{:.0e} rel", c.tolerance) } else { format!("{:.0e}", c.tolerance) };
        s.push_str(&format!("{status:<6} {:<width$} {:>24.15e} {:>24.15e} {tol:>10}\n", c.name, c.value, c.expected));
    }
    s
}
