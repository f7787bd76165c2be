//! Complex polynomial roots from companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluates `Σ c_k z^k` and its derivative by Horner's rule.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Product of linear factors `Π (z − r_k)` as ascending coefficients.
pub fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c
}

/// Product of two polynomials in ascending coefficients.
pub fn multiply(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// All complex roots of the polynomial with ascending coefficients `coeffs`.
///
/// Roots come from the eigenvalues of the companion matrix of the monic
/// normalization, each followed by one Newton polish step that is kept only
/// if it lowers the residual.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if scale == 0.0 {
        return Err(Error::Parameter("zero polynomial has no isolated roots".into()));
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    let lead = coeffs[deg];
    match deg {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![-coeffs[0] / lead]),
        _ => {}
    }
    let monic: Vec<Complex64> = coeffs[..deg].iter().map(|c| c / lead).collect();
    let mut companion = DMatrix::<Complex64>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for (i, c) in monic.iter().enumerate() {
        companion[(i, deg - 1)] = -c;
    }
    let schur = companion
        .try_schur(1e-15, 10_000)
        .ok_or_else(|| Error::numeric("companion eigenvalues", "Schur iteration did not converge"))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::numeric("companion eigenvalues", "non-triangular Schur form"))?;
    let poly = &coeffs[..=deg];
    Ok(eig
        .iter()
        .map(|&z| {
            let (p, dp) = horner(poly, z);
            if dp.norm() == 0.0 {
                return z;
            }
            let polished = z - p / dp;
            let (p2, _) = horner(poly, polished);
            if p2.norm() < p.norm() {
                polished
            } else {
                z
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn recovers_known_roots() {
        let want = vec![c(0.5, 0.0), c(-0.3, 0.2), c(0.1, -0.7), c(0.0, 0.0)];
        let p = from_roots(&want);
        let mut got = roots(&p).unwrap();
        assert_eq!(got.len(), 4);
        for w in &want {
            let (idx, d) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-12, "root {w} missed by {d}");
            got.remove(idx);
        }
    }

    #[test]
    fn linear_and_trailing_zero_coefficients() {
        let r = roots(&[c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn double_root_is_located() {
        let p = from_roots(&[c(0.5, 0.5), c(0.5, 0.5), c(-0.2, 0.0)]);
        let r = roots(&p).unwrap();
        let near = r.iter().filter(|z| (*z - c(0.5, 0.5)).norm() < 1e-6).count();
        assert_eq!(near, 2);
    }
}
