//! Run the finite-difference gradient suite and print one line per op.

use anyhow::Result;
use clap::Args;

use embryoforge_core::gradcheck::{run_suite, REL_TOL};

use crate::util::NumericalFailure;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random cases per op.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let reports = run_suite(args.cases, args.seed);
    let mut failed = 0;
    for r in &reports {
        println!(
            "{:<18} cases {:>3}  max rel err {:.3e}  {}",
            r.op,
            r.cases,
            r.max_rel_err,
            if r.passed() { "ok" } else { "FAIL" }
        );
        if !r.passed() {
            failed += 1;
        }
    }
    println!("{} ops checked, tolerance {REL_TOL:.0e}", reports.len());
    if failed > 0 {
        return Err(NumericalFailure(format!("{failed} op(s) over tolerance")).into());
    }
    Ok(())
}
