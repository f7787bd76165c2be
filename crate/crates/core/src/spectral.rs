//! Exact finite-rank ground truth: Takenaka–Malmquist bases, Gram
//! matrices, singular values of composition and point-mass embedding
//! operators, and Schatten norms.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::{BlaschkeZero, DiskPoint, InnerFunction};
use crate::linalg::{hermitian_eigenvalues, CMatrix};
use crate::rng::Lcg;
use crate::quadrature::{circle_average, graded_breaks, integrate, Adaptive};
use crate::symbols::Symbol;

/// Trapezoid settings for boundary integrals.
pub const BOUNDARY_TOL: f64 = 1e-10;
pub const BOUNDARY_MAX_NODES: usize = 1 << 20;

/// Singular values in nonincreasing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub source: String,
    pub quadrature_tol: f64,
}

impl SingularSpectrum {
    /// From eigenvalues of a positive semidefinite Gram matrix; negative
    /// rounding noise above `−1e−10·max` is clipped to 0.
    fn from_gram(eigs: Vec<f64>, source: String, quadrature_tol: f64) -> Result<Self> {
        let top = eigs.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(&low) = eigs.last() {
            if low < -1e-10 * top.max(1.0) {
                return Err(Error::numeric(
                    "gram spectrum",
                    format!("Gram matrix not positive semidefinite: eigenvalue {low:e}"),
                ));
            }
        }
        Ok(SingularSpectrum {
            values: eigs.into_iter().map(|e| e.max(0.0).sqrt()).collect(),
            source,
            quadrature_tol,
        })
    }

    /// CSV columns `j, s_j` with `j` starting at 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "s_j"])?;
        for (j, s) in self.values.iter().enumerate() {
            w.write_record([(j + 1).to_string(), format!("{s:.17e}")])?;
        }
        w.flush().map_err(|e| Error::io("csv stream", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `(Σ s_j^p)^{1/p}`.
pub fn schatten_norm(sv: &SingularSpectrum, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("Schatten exponent {p} must be positive")));
    }
    Ok(sv.values.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// All Takenaka–Malmquist functions `e_1(z), …, e_N(z)`:
/// `e_j = √(1 − |a_j|²)/(1 − ā_j z) · Π_{k<j} b_{a_k}(z)`, with
/// `b_a = (−ā/|a|)(z − a)/(1 − āz)` and `b_0 = z`.
pub fn tm_values(zeros: &[Complex64], z: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(zeros.len());
    let mut prefix = Complex64::new(1.0, 0.0);
    for a in zeros {
        let den = 1.0 - a.conj() * z;
        out.push(prefix * (1.0 - a.norm_sqr()).sqrt() / den);
        prefix *= if a.norm() == 0.0 {
            z
        } else {
            -a.conj() / a.norm() * (z - a) / den
        };
    }
    out
}

/// `e_j(z)` for `1 ≤ j ≤ N`.
pub fn tm_basis(zeros: &[Complex64], j: usize, z: Complex64) -> Result<Complex64> {
    if j == 0 || j > zeros.len() {
        return Err(Error::Index { index: j, len: zeros.len() });
    }
    Ok(tm_values(&zeros[..j], z)[j - 1])
}

fn finite_zeros(f: &InnerFunction) -> Result<Vec<Complex64>> {
    if !f.is_finite_blaschke() {
        return Err(Error::Parameter(
            "a finite Takenaka–Malmquist basis needs a finite Blaschke product".into(),
        ));
    }
    Ok(f.zeros().iter().map(|a| a.point()).collect())
}

/// Gram matrix `(1/2π)∫ v_j(t)·conj(v_k(t)) dt` by the trapezoid rule
/// with node doubling.
fn boundary_gram(dim: usize, values: impl Fn(f64) -> Result<Vec<Complex64>>, min_nodes: usize) -> Result<(CMatrix, usize)> {
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|j| (j..dim).map(move |k| (j, k))).collect();
    let mut failure = None;
    let (avg, nodes) = circle_average(
        |t, out| match values(t) {
            Ok(v) => {
                for (m, &(j, k)) in pairs.iter().enumerate() {
                    let x = v[j] * v[k].conj();
                    out[2 * m] = x.re;
                    out[2 * m + 1] = x.im;
                }
            }
            Err(e) => {
                failure.get_or_insert(e);
                out.iter_mut().for_each(|o| *o = 0.0);
            }
        },
        2 * pairs.len(),
        BOUNDARY_TOL,
        min_nodes,
        BOUNDARY_MAX_NODES,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut m = CMatrix::zeros(dim);
    for (idx, &(j, k)) in pairs.iter().enumerate() {
        let v = Complex64::new(avg[2 * idx], avg[2 * idx + 1]);
        m.set(j, k, v);
        m.set(k, j, v.conj());
    }
    Ok((m, nodes))
}

/// Gram of the TM basis under the boundary trapezoid rule; the identity
/// up to quadrature error.
pub fn tm_gram(zeros: &[Complex64], min_nodes: usize) -> Result<CMatrix> {
    Ok(boundary_gram(zeros.len(), |t| Ok(tm_values(zeros, Complex64::from_polar(1.0, t))), min_nodes)?.0)
}

/// Singular values of `C_φ : K_ϑ → H²` from the Gram matrix
/// `M_jk = (1/2π)∫ e_j(φ(e^{it}))·conj(e_k(φ(e^{it}))) dt`.
pub fn compop_gram(f: &InnerFunction, s: &Symbol, nodes: usize) -> Result<SingularSpectrum> {
    if !s.is_map() {
        return Err(Error::NotAMap("composition needs a map".into()));
    }
    let zeros = finite_zeros(f)?;
    let (m, used) = boundary_gram(
        zeros.len(),
        |t| Ok(tm_values(&zeros, s.boundary_value(t)?)),
        nodes,
    )?;
    SingularSpectrum::from_gram(
        hermitian_eigenvalues(&m)?,
        format!("C_phi: K_theta(deg {}) -> H2, phi = {}, {used} nodes", zeros.len(), s.to_json()?),
        BOUNDARY_TOL,
    )
}

/// Finite positive measure `Σ c_i δ_{w_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMassMeasure {
    atoms: Vec<(Complex64, f64)>,
}

impl PointMassMeasure {
    pub fn new(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        for (i, (w, c)) in atoms.iter().enumerate() {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(Error::Parameter(format!("atom mass {c} must be positive")));
            }
            if atoms[..i].iter().any(|(v, _)| v == w) {
                return Err(Error::Parameter(format!("repeated atom at {w}")));
            }
        }
        Ok(PointMassMeasure { atoms })
    }

    pub fn atoms(&self) -> &[(Complex64, f64)] {
        &self.atoms
    }

    pub fn with_atom(&self, w: Complex64, c: f64) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        atoms.push((w, c));
        Self::new(atoms)
    }
}

/// Target space of an embedding `I_μ`.
#[derive(Debug, Clone, Copy)]
pub enum Space<'a> {
    Model(&'a InnerFunction),
    Hardy,
    /// Smirnov space of the disk `|z − center| < radius`, normed by
    /// `‖Σ a_n (z − c)^n‖² = Σ |a_n|² R^{2n}`.
    E2Disk { center: Complex64, radius: f64 },
}

impl Space<'_> {
    /// Reproducing kernel `K(w, z)`, conjugate-linear in `w`.
    pub fn kernel(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        match self {
            Space::Model(f) => f.kernel(w, z),
            Space::Hardy => {
                if w.norm() >= 1.0 || z.norm() >= 1.0 {
                    return Err(Error::Parameter("Hardy kernel needs points of the disk".into()));
                }
                Ok(1.0 / (1.0 - w.conj() * z))
            }
            Space::E2Disk { center, radius } => {
                let (a, b) = ((w - center) / radius, (z - center) / radius);
                if a.norm() >= 1.0 || b.norm() >= 1.0 {
                    return Err(Error::Parameter("point outside the E² disk".into()));
                }
                Ok(1.0 / (1.0 - a.conj() * b))
            }
        }
    }

    fn label(&self) -> String {
        match self {
            Space::Model(f) => format!("K_theta({} zeros, {} atoms)", f.zeros().len(), f.atoms().len()),
            Space::Hardy => "H2".into(),
            Space::E2Disk { center, radius } => format!("E2(disk {center}, {radius})"),
        }
    }
}

/// Gram matrix `[√(c_i c_j)·K(w_j, w_i)]` of the embedding.
pub fn embedding_matrix(space: Space<'_>, m: &PointMassMeasure) -> Result<CMatrix> {
    let atoms = m.atoms();
    let n = atoms.len();
    let mut g = CMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let (wi, ci) = atoms[i];
            let (wj, cj) = atoms[j];
            let v = (ci * cj).sqrt() * space.kernel(wj, wi)?;
            g.set(i, j, v);
            g.set(j, i, v.conj());
        }
    }
    Ok(g)
}

/// Singular values of `I_μ : space → L²(μ)`.
pub fn embed_gram(space: Space<'_>, m: &PointMassMeasure) -> Result<SingularSpectrum> {
    let g = embedding_matrix(space, m)?;
    let eigs = hermitian_eigenvalues(&g)?;
    let top = eigs.first().copied().unwrap_or(0.0);
    if eigs.last().is_some_and(|&l| l.abs() <= 1e-12 * top) && m.atoms().len() > 1 {
        log::warn!("embedding Gram matrix is numerically rank deficient");
    }
    SingularSpectrum::from_gram(eigs, format!("I_mu: {} -> L2(mu), {} atoms", space.label(), m.atoms().len()), 0.0)
}

/// `atoms` point masses, uniform in `|w| ≤ max_radius` with `|w − avoid| ≥
/// min_dist` by rejection, masses uniform in `(0, 1]`.
pub fn random_point_measure(
    rng: &mut Lcg,
    atoms: usize,
    max_radius: f64,
    avoid: Complex64,
    min_dist: f64,
) -> Result<PointMassMeasure> {
    let mut out: Vec<(Complex64, f64)> = Vec::with_capacity(atoms);
    let mut tries = 0usize;
    while out.len() < atoms {
        tries += 1;
        if tries > 1000 * atoms.max(1) {
            return Err(Error::Parameter("sampling region is (nearly) empty".into()));
        }
        let w = rng.in_disk(max_radius);
        if (w - avoid).norm() < min_dist || out.iter().any(|(v, _)| *v == w) {
            continue;
        }
        out.push((w, 1.0 - rng.uniform()));
    }
    PointMassMeasure::new(out)
}

/// Range of `‖I_μ‖_{S_p}` on one space over another across measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparability {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub constant: f64,
}

pub fn schatten_comparability(
    top: Space<'_>,
    bottom: Space<'_>,
    measures: &[PointMassMeasure],
    p: f64,
) -> Result<Comparability> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for m in measures {
        let r = schatten_norm(&embed_gram(top, m)?, p)? / schatten_norm(&embed_gram(bottom, m)?, p)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(Comparability {
        min_ratio: lo,
        max_ratio: hi,
        constant: hi.max(1.0 / lo),
    })
}

/// `(1/2π)∫ k(φ(e^{it}), φ(e^{it})) dt`, the HS norm squared of
/// `C_φ : K_ϑ → H²`, by the trapezoid rule with node doubling.
pub fn hs_pullback(f: &InnerFunction, s: &Symbol, nodes: usize) -> Result<f64> {
    if !s.is_map() {
        return Err(Error::NotAMap("pullback needs a map".into()));
    }
    let mut failure = None;
    let (avg, _) = circle_average(
        |t, out| {
            out[0] = match s.boundary_value(t).and_then(|w| f.kernel_diag(DiskPoint::new(w))) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        1,
        BOUNDARY_TOL,
        nodes,
        BOUNDARY_MAX_NODES,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(avg[0]),
    }
}

/// Adaptive Gauss version of [`hs_pullback`] with panels graded toward
/// the parameters `breaks` (e.g. where the image curve approaches zeros
/// of `ϑ`), down to `scale`.
pub fn hs_pullback_graded(f: &InnerFunction, s: &Symbol, breaks: &[f64], scale: f64) -> Result<f64> {
    let mut cuts = Vec::new();
    for &b in breaks {
        graded_breaks(b, scale, PI, &mut cuts);
    }
    let mut failure = None;
    let est = integrate(
        |t| match s.boundary_value(t).and_then(|w| f.kernel_diag(DiskPoint::new(w))) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        -PI,
        PI,
        &cuts,
        Adaptive {
            max_panels: 40_000,
            ..Adaptive::with_tol(1e-10, 0.0)
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !est.converged {
        return Err(Error::numeric("graded pullback", format!("error {:e}", est.error)));
    }
    Ok(est.value / (2.0 * PI))
}

/// `1 − conj(a)·w` with `a` given by direction and gap, formed without
/// cancellation when `w` is close to `a/|a|`.
fn one_minus_conj(a: &BlaschkeZero, w: Complex64) -> Complex64 {
    let dir = Complex64::from_polar(1.0, a.angle());
    let x = dir.conj() * w;
    (1.0 - x) + a.gap() * x
}

/// `(1 − |a|)·‖C_φ k_a‖²_{H²}` with `k_a = 1/(1 − āz)`, by adaptive
/// quadrature graded toward the parameter where `φ(e^{it})` comes
/// closest to `a`.
pub fn normalized_kernel_image(a: &BlaschkeZero, s: &Symbol) -> Result<f64> {
    if !s.is_map() {
        return Err(Error::NotAMap("kernel images need a map".into()));
    }
    let g = |t: f64| -> Result<f64> {
        let w = s.boundary_value(t)?;
        Ok(1.0 / one_minus_conj(a, w).norm_sqr())
    };
    // locate the peak by a scan and golden-section refinement
    let scan = 4096;
    let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..scan {
        let t = -PI + 2.0 * PI * k as f64 / scan as f64;
        let v = g(t)?;
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let h = 2.0 * PI / scan as f64;
    let (mut lo, mut hi) = (best_t - h, best_t + h);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..120 {
        let x1 = hi - ratio * (hi - lo);
        let x2 = lo + ratio * (hi - lo);
        if g(x1)? >= g(x2)? {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let peak = 0.5 * (lo + hi);
    let width = 1.0 / g(peak)?.sqrt();
    let mut cuts = Vec::new();
    graded_breaks(peak, 0.25 * width, PI, &mut cuts);
    let mut failure = None;
    let est = integrate(
        |t| match g(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        -PI,
        PI,
        &cuts,
        Adaptive::with_tol(1e-11, 0.0),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !est.converged {
        return Err(Error::numeric("kernel image norm", format!("error {:e}", est.error)));
    }
    Ok(a.gap() * est.value / (2.0 * PI))
}

/// `Σ_n ((1 − |z_n|)/|1 − conj(z_n)·z|)^a` at `z = (1 − s)e^{it}`.
pub fn separation_sum(zeros: &[BlaschkeZero], a: f64, s: f64, t: f64) -> f64 {
    let z = Complex64::from_polar(1.0 - s, t);
    zeros
        .iter()
        .map(|zn| {
            // 1 − conj(dir)·z in polar-gap form, then the gap correction
            let d = t - zn.angle();
            let half = (0.5 * d).sin();
            let base = Complex64::new(2.0 * half * half + s * d.cos(), -(1.0 - s) * d.sin());
            let x = Complex64::from_polar(1.0, -zn.angle()) * z;
            (zn.gap() / (base + zn.gap() * x).norm()).powf(a)
        })
        .sum()
}
