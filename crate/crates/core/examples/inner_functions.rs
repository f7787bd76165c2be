//! Evaluate inner functions, their model-space kernels and level domains.

use modelspace::{dist_and_surrogate, level_boundary, DiskPoint, InnerFunction, Result};
use num_complex::Complex64;

fn main() -> Result<()> {
    let pw = InnerFunction::paley_wiener();
    let b = InnerFunction::blaschke(&[Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.7)])?;
    let z = Complex64::new(0.6, 0.3);
    for (name, f) in [("Paley–Wiener", &pw), ("Blaschke", &b)] {
        let p = DiskPoint::new(z);
        println!(
            "{name}: ϑ(z) = {:.6}, k(z,z) = {:.6}, Δk(z,z) = {:.6}",
            f.value(z)?,
            f.kernel_diag(p)?,
            f.kernel_laplacian_diag(p)?
        );
        println!("  spectrum {:?}", f.spectrum(1e-9));
        let dom = level_boundary(f, 2.0, 1e-3)?;
        let (d, sur) = dist_and_surrogate(f, &dom, z)?;
        println!(
            "  D_2: {} vertices, perimeter {:.4}, dist(z, ∂D) = {d:.4}, (1−|z|²)/(1−|ϑ|²) = {sur:.4}",
            dom.vertices().len(),
            dom.perimeter()
        );
    }
    Ok(())
}
