//! Berezin-type test for a disk-shaped level domain and the sufficient
//! S_p test.

use modelspace::criteria::{berezin_test, sufficient_sp, BerezinKernel, ShellOptions, WeightedComposition};
use modelspace::{level_boundary, InnerFunction, Result, Symbol};
use num_complex::Complex64;

fn main() -> Result<()> {
    let pw = InnerFunction::paley_wiener();
    // D_δ for δ = e^{1/2} is the disk |z + 1| < 2
    let dom = level_boundary(&pw, 0.5f64.exp(), 1e-4)?;
    let s = Symbol::affine(Complex64::new(0.25, 0.0), 0.25)?;
    let op = WeightedComposition::from_domain(&dom, &s)?;
    println!("‖C G_0‖² = {:.8}", op.norm_sq(Complex64::new(0.0, 0.0), BerezinKernel::G, 1e-12)?);
    let opts = ShellOptions::with_shells(16);
    for which in [BerezinKernel::G, BerezinKernel::H] {
        let r = berezin_test(&dom, &s, 2.0, which, &opts)?;
        println!("{which:?}, p=2: {} total {:.6}", r.verdict.label(), r.total());
    }
    let r = sufficient_sp(&pw, &Symbol::sector(0.5)?, 6.0, 0.4, true, &opts)?;
    println!("sufficient test, sector α=1/2, p=6: {}", r.verdict.label());
    Ok(())
}
