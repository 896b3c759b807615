//! Runs the full acceptance matrix and prints one line per criterion.

use std::process::ExitCode;

use rdv_cli::accept;

fn main() -> ExitCode {
    let reports = accept::run_all();
    for r in &reports {
        println!("{r}");
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria passed", reports.len());
    if passed == reports.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
