//! Integral Schatten criteria: the sector map on the Paley–Wiener model
//! space changes verdict at p* = 2α/(1 − α); the corner model on H² is in
//! no Schatten class.

use modelspace::criteria::{integral_schatten_hardy_with, integral_schatten_kernel_with, ShellOptions};
use modelspace::experiments::corner_threshold;
use modelspace::{InnerFunction, Result, Symbol};

fn main() -> Result<()> {
    let pw = InnerFunction::paley_wiener();
    let opts = ShellOptions::with_shells(20);
    for alpha in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let s = Symbol::sector(alpha)?;
        let p_star = corner_threshold(alpha);
        for p in [0.5 * p_star, 2.0 * p_star] {
            let r = integral_schatten_kernel_with(&pw, &s, p, &opts)?;
            println!("K_ϑ  α={alpha:.3} p={p:.3}: {} (statistic {:.3})", r.verdict.label(), r.statistic);
        }
    }
    let corner = Symbol::corner(0.5)?;
    for p in [1.0, 6.0] {
        let r = integral_schatten_hardy_with(&corner, p, &opts)?;
        println!("H²   corner p={p}: {}", r.verdict.label());
    }
    Ok(())
}
