//! One PASS/FAIL line per acceptance criterion, printed as each completes.
//! Runs without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use gapstrip::verify::run_all;

fn main() -> ExitCode {
    let results = run_all(0, |r| println!("{}", r.line()));
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if results.len() != 10 || !failed.is_empty() {
        eprintln!("acceptance: {} criteria run, failed: {failed:?}", results.len());
        return ExitCode::FAILURE;
    }
    println!("acceptance: all {} criteria passed", results.len());
    ExitCode::SUCCESS
}
