//! Whitney-type decomposition of a level domain and its validation.

use modelspace::{ahlfors_ratio, build_whitney, level_boundary, validate_whitney, InnerFunction, Result, WhitneyParams};

fn main() -> Result<()> {
    let f = InnerFunction::paley_wiener();
    let dom = level_boundary(&f, 0.5f64.exp(), 1e-3)?;
    let dec = build_whitney(&dom, WhitneyParams { max_depth: 16, ..Default::default() })?;
    let rep = validate_whitney(&dec, &dom, 16);
    println!("{} boxes, {} residual squares", rep.boxes, rep.residual);
    println!("constants a = {:.3}, b = {:.3}, c = {:.3}, multiplicity {}", rep.a, rep.b, rep.c, rep.multiplicity);
    let bounds = dec.distance_bounds(&dom);
    println!("dist/diam in [{:.3}, {:.3}]", bounds.m, bounds.big_m);
    println!("Ahlfors ratio of ∂D_δ: {:.4}", ahlfors_ratio(dom.vertices(), true, 64, 24));
    let mut csv = Vec::new();
    dec.write_csv(&mut csv)?;
    for line in String::from_utf8_lossy(&csv).lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
