//! Hilbert–Schmidt norm of C_φ on K_ϑ by three independent routes.

use modelspace::criteria::{hs_bounds, ShellOptions};
use modelspace::experiments::hs_routes;
use modelspace::{compop_gram, InnerFunction, Result, Symbol};
use num_complex::Complex64;

fn main() -> Result<()> {
    let f = InnerFunction::blaschke(&[Complex64::new(0.3, 0.5), Complex64::new(-0.6, 0.1), Complex64::new(0.0, 0.0)])?;
    let s = Symbol::affine(Complex64::new(0.25, 0.0), 0.25)?;
    let opts = ShellOptions::with_shells(40);
    println!("singular values {:?}", compop_gram(&f, &s, 64)?.values);
    let (routes, _) = hs_routes(&f, &s, &opts)?;
    for r in &routes {
        println!("{:9} {:.12}", r.name, r.value.unwrap_or(f64::NAN));
    }
    let (upper, lower) = hs_bounds(&f, &s, &opts)?;
    println!("one-sided tests: lower {:.6} ≤ upper {:.6}", lower.total(), upper.total());
    Ok(())
}
