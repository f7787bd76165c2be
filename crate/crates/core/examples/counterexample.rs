//! Zeros clustering tangentially at 1 with φ = (1 + z)/2: the
//! Hilbert–Schmidt series has terms of order 1/n while the one-component
//! integral test converges.

use modelspace::criteria::ShellOptions;
use modelspace::experiments::{counterexample_lower_test, counterexample_terms, series_fit};
use modelspace::Result;

fn main() -> Result<()> {
    let terms = counterexample_terms(8)?;
    for t in &terms {
        println!("n={} t_n={:.6} n·t_n={:.4} closed form {:.6}", t.n, t.t, t.n as f64 * t.t, t.closed_form);
    }
    let (c0, slope) = series_fit(&terms, 3);
    println!("c₀ = {c0:.4}, log-log slope {slope:.3}");
    let report = counterexample_lower_test(30, &ShellOptions::with_shells(24))?;
    println!("lower integral test: {} ({:.6})", report.verdict.label(), report.total());
    Ok(())
}
