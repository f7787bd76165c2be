//! Nevanlinna counting functions and pullback measures.

use modelspace::criteria::mass_by_depth;
use modelspace::{pullback_measure_adaptive, Result, Symbol, WhitneyDecomposition};
use num_complex::Complex64;

fn main() -> Result<()> {
    let z = Complex64::new(0.3, 0.4);
    let symbols = [
        ("(1+z)/2", Symbol::affine(Complex64::new(0.5, 0.0), 0.5)?),
        ("Blaschke", Symbol::blaschke(&[Complex64::new(0.2, 0.1), Complex64::new(-0.5, 0.3)])?),
        ("sector α=1/2", Symbol::sector(0.5)?),
    ];
    for (name, s) in &symbols {
        println!(
            "{name}: N(z) = {:.10}, argument principle {:.10}",
            s.nevanlinna(z)?,
            s.nevanlinna_oracle(z, 16)?
        );
    }

    // μ_φ of the sector map on the standard dyadic grid
    let dec = WhitneyDecomposition::dyadic_grid(10);
    let m = pullback_measure_adaptive(&symbols[2].1, &dec, 2048)?;
    println!("sector map pullback: total mass {:.12}", m.total_mass());
    for (depth, mass) in mass_by_depth(&m, &dec)? {
        println!("  depth {depth:2}: {mass:.4e}");
    }
    Ok(())
}
