//! Hermitian eigenvalues by cyclic Jacobi rotations.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense row-major complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    /// Largest deviation from Hermitian symmetry, `max |a_ij − conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    acc += self.get(i, j).norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a Hermitian matrix in nonincreasing order.
///
/// The strictly lower triangle is ignored; the matrix is symmetrized from
/// the upper triangle before rotating.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut a = CMatrix::from_fn(n, |i, j| {
        if i < j {
            m.get(i, j)
        } else if i > j {
            m.get(j, i).conj()
        } else {
            Complex64::new(m.get(i, i).re, 0.0)
        }
    });
    let scale = (0..n).fold(0.0f64, |s, i| {
        (0..n).fold(s, |s, j| s.max(a.get(i, j).norm()))
    });
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let threshold = 1e-15 * scale;
    for _ in 0..MAX_SWEEPS {
        if a.off_diagonal_norm() <= threshold {
            let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
            ev.sort_by(|x, y| y.total_cmp(x));
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
    }
    Err(Error::numeric(
        "jacobi eigenvalues",
        format!("off-diagonal norm {:e} after {MAX_SWEEPS} sweeps", a.off_diagonal_norm()),
    ))
}

fn rotate(a: &mut CMatrix, p: usize, q: usize) {
    let b = a.get(p, q);
    let babs = b.norm();
    if babs == 0.0 {
        return;
    }
    let alpha = a.get(p, p).re;
    let gamma = a.get(q, q).re;
    // phase-rotate the pair to a real symmetric 2x2 block, then a real rotation
    let phase = b / babs;
    let tau = (gamma - alpha) / (2.0 * babs);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.dim();
    let ph_conj = phase.conj();
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, akp * c - akq * ph_conj * s);
        a.set(k, q, akp * s + akq * ph_conj * c);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, apk * c - aqk * phase * s);
        a.set(q, k, apk * s + aqk * phase * c);
    }
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    a.set(p, p, Complex64::new(app, 0.0));
    a.set(q, q, Complex64::new(aqq, 0.0));
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = CMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => c(1.0, 0.0),
            (1, 1) => c(4.0 / 3.0, 0.0),
            _ => c(1.0, 0.0),
        });
        let ev = hermitian_eigenvalues(&m).unwrap();
        let tr: f64 = 1.0 + 4.0 / 3.0;
        let det = 4.0 / 3.0 - 1.0;
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert!((ev[0] - (tr / 2.0 + disc)).abs() < 1e-14);
        assert!((ev[1] - (tr / 2.0 - disc)).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_nalgebra_on_random_hermitian() {
        let mut state = 12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in [1, 3, 7, 12] {
            let mut m = CMatrix::zeros(n);
            for i in 0..n {
                m.set(i, i, c(next(), 0.0));
                for j in i + 1..n {
                    let v = c(next(), next());
                    m.set(i, j, v);
                    m.set(j, i, v.conj());
                }
            }
            let ours = hermitian_eigenvalues(&m).unwrap();
            let dm = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
            let mut theirs: Vec<f64> = dm.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|x, y| y.total_cmp(x));
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}
