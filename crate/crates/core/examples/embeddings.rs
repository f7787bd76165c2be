//! Schatten norms of point-mass embeddings into K_ϑ and into E² of a disk
//! inside D_δ stay comparable.

use modelspace::rng::Lcg;
use modelspace::spectral::{random_point_measure, schatten_comparability};
use modelspace::{InnerFunction, Result, Space};
use num_complex::Complex64;

fn main() -> Result<()> {
    let pw = InnerFunction::paley_wiener();
    let e2 = Space::E2Disk { center: Complex64::new(-1.0, 0.0), radius: 2.0 };
    let mut rng = Lcg::new(0);
    let measures = (0..50)
        .map(|_| random_point_measure(&mut rng, 5, 0.99, Complex64::new(1.0, 0.0), 0.05))
        .collect::<Result<Vec<_>>>()?;
    for p in [1.0, 2.0, 4.0] {
        let c = schatten_comparability(e2, Space::Model(&pw), &measures, p)?;
        println!("p={p}: ratio in [{:.4}, {:.4}], C = {:.4}", c.min_ratio, c.max_ratio, c.constant);
    }
    Ok(())
}
