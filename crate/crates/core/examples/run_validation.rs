//! The built-in invariant suites with a chosen seed.

use tunnelcorr::validate::{run, ValidateOptions};

fn main() -> tunnelcorr::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let report = run(&ValidateOptions { seed, ..Default::default() })?;
    print!("{}", report.human_summary());
    std::process::exit(if report.passed { 0 } else { 1 });
}
