//! Inner functions: Blaschke products with finitely many singular atoms,
//! their model-space reproducing kernels, and spectra.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default distance from a spectrum point inside which boundary
/// evaluations are refused.
pub const SPECTRUM_EXCLUSION: f64 = 1e-6;

/// A point of the closed disk together with `1 − |z|²`, carried separately
/// so that the boundary defect keeps full relative precision near the
/// circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint {
    pub z: Complex64,
    pub comp: f64,
}

impl DiskPoint {
    pub fn new(z: Complex64) -> Self {
        let r = z.norm();
        DiskPoint {
            z,
            comp: (1.0 - r) * (1.0 + r),
        }
    }

    /// The point `(1 − gap)·e^{it}`.
    pub fn from_gap(gap: f64, t: f64) -> Self {
        DiskPoint {
            z: Complex64::from_polar(1.0 - gap, t),
            comp: gap * (2.0 - gap),
        }
    }
}

/// A zero of a Blaschke product stored as a unit direction and the gap
/// `1 − |a|`, so zeros closer to the circle than one ulp stay inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlaschkeZero {
    dir: Complex64,
    gap: f64,
}

impl BlaschkeZero {
    pub fn new(a: Complex64) -> Result<Self> {
        let r = a.norm();
        if !(r < 1.0) {
            return Err(Error::Parameter(format!("zero {a} is not inside the unit disk")));
        }
        if r == 0.0 {
            return Ok(BlaschkeZero {
                dir: Complex64::new(1.0, 0.0),
                gap: 1.0,
            });
        }
        Ok(BlaschkeZero { dir: a / r, gap: 1.0 - r })
    }

    /// Zero at `(1 − gap)·e^{i·angle}`, `0 < gap ≤ 1`.
    pub fn from_polar_gap(angle: f64, gap: f64) -> Result<Self> {
        if !(gap > 0.0 && gap <= 1.0) {
            return Err(Error::Parameter(format!("zero gap {gap} outside (0, 1]")));
        }
        Ok(BlaschkeZero {
            dir: Complex64::from_polar(1.0, angle),
            gap,
        })
    }

    pub fn point(&self) -> Complex64 {
        self.dir * (1.0 - self.gap)
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn angle(&self) -> f64 {
        self.dir.arg()
    }

    pub fn is_origin(&self) -> bool {
        self.gap == 1.0
    }

    /// `1 − |a|²`.
    pub fn weight(&self) -> f64 {
        self.gap * (2.0 - self.gap)
    }

    /// `1 − conj(a)·z`.
    fn pole_factor(&self, z: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0) - self.point().conj() * z
    }

    /// Blaschke factor and its derivative; the origin contributes `z`.
    pub fn factor(&self, z: Complex64) -> (Complex64, Complex64) {
        if self.is_origin() {
            return (z, Complex64::new(1.0, 0.0));
        }
        let den = self.pole_factor(z);
        let unimod = -self.dir.conj();
        let v = unimod * (z - self.point()) / den;
        let d = unimod * self.weight() / (den * den);
        (v, d)
    }
}

/// A point mass `weight·δ_ξ` of the singular measure, `ξ = e^{i·angle}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    angle: f64,
    point: Complex64,
    weight: f64,
}

impl Atom {
    pub fn new(angle: f64, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Parameter(format!("atom weight {weight} must be positive")));
        }
        Ok(Atom {
            angle,
            point: Complex64::from_polar(1.0, angle),
            weight,
        })
    }

    pub fn point(&self) -> Complex64 {
        self.point
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `exp(−w(ξ+z)/(ξ−z))` and its derivative.
    fn factor(&self, z: Complex64) -> (Complex64, Complex64) {
        let xi = self.point;
        let diff = xi - z;
        let v = (-(xi + z) / diff * self.weight).exp();
        let d = v * (-2.0 * self.weight * xi / (diff * diff));
        (v, d)
    }
}

/// Serialized form `{ "zeros": [[re, im], ...], "atoms": [[theta, weight], ...] }`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerSpec {
    #[serde(default)]
    pub zeros: Vec<[f64; 2]>,
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
}

/// Inner function `ϑ = B_Λ · S_ω` with a (possibly truncated) zero sequence
/// and a finitely atomic singular measure.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFunction {
    zeros: Vec<BlaschkeZero>,
    atoms: Vec<Atom>,
    tail_bound: f64,
    limit_angles: Vec<f64>,
}

impl InnerFunction {
    pub fn new(zeros: Vec<BlaschkeZero>, atoms: Vec<Atom>) -> Result<Self> {
        if zeros.is_empty() && atoms.is_empty() {
            return Err(Error::Parameter(
                "an inner function needs at least one zero or atom".into(),
            ));
        }
        Ok(InnerFunction {
            zeros,
            atoms,
            tail_bound: 0.0,
            limit_angles: Vec::new(),
        })
    }

    /// Finite Blaschke product with the given zeros.
    pub fn blaschke(zeros: &[Complex64]) -> Result<Self> {
        let zeros = zeros
            .iter()
            .map(|&a| BlaschkeZero::new(a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(zeros, Vec::new())
    }

    /// `z^n`.
    pub fn power(n: usize) -> Result<Self> {
        Self::blaschke(&vec![Complex64::new(0.0, 0.0); n])
    }

    /// `exp(−(1+z)/(1−z))`, whose model space is the Paley–Wiener space.
    pub fn paley_wiener() -> Self {
        Self::new(Vec::new(), vec![Atom::new(0.0, 1.0).expect("unit atom")])
            .expect("nonempty data")
    }

    /// Blaschke product over `z_n = (1 − 4^{−n}/n)·e^{i·2^{−n}}`, `n = 1..=count`.
    ///
    /// The zeros approach `1` tangentially; the omitted tail
    /// `Σ_{n>count} 4^{−n}/n` is recorded as the truncation bound.
    pub fn tangent_cluster(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Parameter("need at least one zero".into()));
        }
        let zeros = (1..=count)
            .map(tangent_cluster_zero)
            .collect::<Result<Vec<_>>>()?;
        let mut tail = 0.0;
        let mut n = count + 1;
        loop {
            let term = 4f64.powi(-(n as i32)) / n as f64;
            tail += term;
            if term < 1e-30 * tail.max(1e-300) || n > count + 200 {
                break;
            }
            n += 1;
        }
        Ok(InnerFunction {
            zeros,
            atoms: Vec::new(),
            tail_bound: tail,
            limit_angles: vec![0.0],
        })
    }

    /// Truncated infinite product: `tail_bound ≥ Σ (1 − |z_n|)` over the
    /// omitted zeros, `limit_angles` the boundary accumulation points.
    pub fn truncated(
        zeros: Vec<BlaschkeZero>,
        atoms: Vec<Atom>,
        tail_bound: f64,
        limit_angles: Vec<f64>,
    ) -> Result<Self> {
        if !(tail_bound >= 0.0) {
            return Err(Error::Parameter("tail bound must be nonnegative".into()));
        }
        let mut f = Self::new(zeros, atoms)?;
        f.tail_bound = tail_bound;
        f.limit_angles = limit_angles;
        Ok(f)
    }

    pub fn from_spec(spec: &InnerSpec) -> Result<Self> {
        let zeros = spec
            .zeros
            .iter()
            .map(|[re, im]| BlaschkeZero::new(Complex64::new(*re, *im)))
            .collect::<Result<Vec<_>>>()?;
        let atoms = spec
            .atoms
            .iter()
            .map(|[t, w]| Atom::new(*t, *w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(zeros, atoms)
    }

    pub fn to_spec(&self) -> InnerSpec {
        InnerSpec {
            zeros: self
                .zeros
                .iter()
                .map(|z| {
                    let p = z.point();
                    [p.re, p.im]
                })
                .collect(),
            atoms: self.atoms.iter().map(|a| [a.angle, a.weight]).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_spec())?)
    }

    pub fn zeros(&self) -> &[BlaschkeZero] {
        &self.zeros
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// True when the data is a finite Blaschke product (no atoms, no tail).
    pub fn is_finite_blaschke(&self) -> bool {
        self.atoms.is_empty() && self.limit_angles.is_empty()
    }

    /// Bound on `| |ϑ_N(z)| − |ϑ(z)| |` from the truncated tail:
    /// `Σ_{n>N} (1 − |b_n(z)|) ≤ Σ (1 − |z_n|²)(1 + |z|)/|1 − z̄_n z|`,
    /// with `|1 − z̄_n z| ≥ dist(z, limit set)` for tail zeros near the limits.
    pub fn truncation_error(&self, z: Complex64) -> f64 {
        if self.tail_bound == 0.0 {
            return 0.0;
        }
        let sep = self
            .limit_angles
            .iter()
            .map(|t| (Complex64::from_polar(1.0, *t) - z).norm())
            .fold(f64::INFINITY, f64::min)
            .max(1e-300);
        2.0 * self.tail_bound * (1.0 + z.norm()) / sep
    }

    /// Inside the open disk an atom factor is bounded, so only points on or
    /// outside the circle are excluded near atoms.
    fn check_singular(&self, z: Complex64) -> Result<()> {
        for a in &self.atoms {
            let d = (z - a.point).norm();
            if d == 0.0 || (d < SPECTRUM_EXCLUSION && z.norm() >= 1.0) {
                return Err(Error::Pole {
                    point: z,
                    what: format!("singular atom at angle {}", a.angle),
                });
            }
        }
        for a in &self.zeros {
            if !a.is_origin() && a.pole_factor(z).norm() < 1e-15 {
                return Err(Error::Pole {
                    point: z,
                    what: format!("reflection of the zero {}", a.point()),
                });
            }
        }
        Ok(())
    }

    /// `ϑ(z)` and `ϑ′(z)`. Outside the disk the rational/exponential factors
    /// are the reflections `1/conj(ϑ(1/z̄))`.
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        self.check_singular(z)?;
        let mut v = Complex64::new(1.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        let factors = self
            .zeros
            .iter()
            .map(|a| a.factor(z))
            .chain(self.atoms.iter().map(|a| a.factor(z)));
        for (fv, fd) in factors {
            d = v * fd + d * fv;
            v *= fv;
        }
        Ok((v, d))
    }

    pub fn value(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.eval(z)?.0)
    }

    /// `log |ϑ(z)|`, summed factor by factor.
    pub fn log_modulus(&self, z: Complex64) -> Result<f64> {
        self.check_singular(z)?;
        let mut acc = 0.0;
        for a in &self.zeros {
            acc += a.factor(z).0.norm().ln();
        }
        for a in &self.atoms {
            let diff = a.point - z;
            acc -= a.weight * (1.0 - z.norm_sqr()) / diff.norm_sqr();
        }
        Ok(acc)
    }

    /// `ϑ′/ϑ`, the derivative of `log ϑ`.
    pub fn log_derivative(&self, z: Complex64) -> Result<Complex64> {
        self.check_singular(z)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.zeros {
            if a.is_origin() {
                acc += 1.0 / z;
            } else {
                acc += a.weight() / ((z - a.point()) * a.pole_factor(z));
            }
        }
        for a in &self.atoms {
            let diff = a.point - z;
            acc -= 2.0 * a.weight * a.point / (diff * diff);
        }
        Ok(acc)
    }

    /// `k(z, z) = (1 − |ϑ(z)|²)/(1 − |z|²)`, summed without cancellation:
    /// each factor `f` contributes `q = (1 − |f|²)/(1 − |z|²)`, and
    /// `(1 − Π|f_k|²)/(1 − |z|²) = Σ_k q_k Π_{j<k} |f_j|²`.
    /// Finite on the circle away from the spectrum.
    pub fn kernel_diag(&self, p: DiskPoint) -> Result<f64> {
        self.check_singular(p.z)?;
        let mut acc = 0.0;
        let mut prefix = 1.0;
        for a in &self.zeros {
            let q = if a.is_origin() {
                1.0
            } else {
                a.weight() / a.pole_factor(p.z).norm_sqr()
            };
            acc += q * prefix;
            prefix *= (1.0 - q * p.comp).max(0.0);
        }
        for a in &self.atoms {
            let dist2 = (a.point - p.z).norm_sqr();
            let x = 2.0 * a.weight * p.comp / dist2;
            let ratio = if x.abs() < 1e-12 { 1.0 - 0.5 * x } else { -(-x).exp_m1() / x };
            let q = 2.0 * a.weight / dist2 * ratio;
            acc += q * prefix;
            prefix *= (1.0 - q * p.comp).max(0.0);
        }
        Ok(acc)
    }

    /// `1 − |ϑ(z)|²` with full relative precision near the circle.
    pub fn defect(&self, p: DiskPoint) -> Result<f64> {
        Ok(self.kernel_diag(p)? * p.comp)
    }

    /// Model-space reproducing kernel `k(w, z) = (1 − conj(ϑ(w))ϑ(z))/(1 − w̄z)`.
    pub fn kernel(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        if w == z {
            return Ok(Complex64::new(self.kernel_diag(DiskPoint::new(z))?, 0.0));
        }
        let den = Complex64::new(1.0, 0.0) - w.conj() * z;
        if den.norm() < 1e-15 {
            return Err(Error::Pole {
                point: z,
                what: "kernel denominator 1 − w̄z vanishes".into(),
            });
        }
        let tw = self.value(w)?;
        let tz = self.value(z)?;
        Ok((Complex64::new(1.0, 0.0) - tw.conj() * tz) / den)
    }

    /// Laplacian of `z ↦ k(z, z)`. Without atoms this is `4Σ_j |e_j′(z)|²`
    /// over the Takenaka–Malmquist basis, which has no cancellation near
    /// the circle; with atoms it is [`Self::kernel_laplacian_closed`].
    pub fn kernel_laplacian_diag(&self, p: DiskPoint) -> Result<f64> {
        if !self.atoms.is_empty() {
            return self.kernel_laplacian_closed(p);
        }
        self.check_singular(p.z)?;
        let z = p.z;
        let one = Complex64::new(1.0, 0.0);
        let (mut b, mut db) = (one, Complex64::new(0.0, 0.0));
        let mut acc = 0.0;
        for a in &self.zeros {
            // e = B·g with g = √(1 − |a|²)/(1 − āz)
            let (g, dg) = if a.is_origin() {
                (one, Complex64::new(0.0, 0.0))
            } else {
                let den = a.pole_factor(z);
                let c = a.weight().sqrt();
                (c / den, c * a.point().conj() / (den * den))
            };
            acc += (db * g + b * dg).norm_sqr();
            let (fv, fd) = a.factor(z);
            db = db * fv + b * fd;
            b *= fv;
        }
        Ok(4.0 * acc)
    }

    /// Closed-form Laplacian of `z ↦ k(z, z)`:
    /// `4[(1+|z|²)(1−|ϑ|²)/(1−|z|²)³ − 2Re(z·conj(ϑ)·ϑ′)/(1−|z|²)² − |ϑ′|²/(1−|z|²)]`.
    /// Loses relative accuracy like `ε/(1 − |z|²)²` near the circle.
    pub fn kernel_laplacian_closed(&self, p: DiskPoint) -> Result<f64> {
        let (v, d) = self.eval(p.z)?;
        let kd = self.kernel_diag(p)?;
        let dd = p.comp;
        let num = (1.0 + p.z.norm_sqr()) * kd
            - 2.0 * (p.z * v.conj() * d).re
            - dd * d.norm_sqr();
        Ok(4.0 * num / (dd * dd))
    }

    /// `Σ(ϑ)`: closure of the zeros on the circle together with the atoms,
    /// as points on the circle sorted by angle, merged within `tol`.
    pub fn spectrum(&self, tol: f64) -> Vec<Complex64> {
        let mut angles: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.angle)
            .chain(self.limit_angles.iter().copied())
            .map(|t| t.rem_euclid(2.0 * PI))
            .collect();
        angles.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::new();
        for t in angles {
            match merged.last() {
                Some(&last) if (t - last) <= tol => {}
                _ => merged.push(t),
            }
        }
        if merged.len() > 1 {
            let first = merged[0];
            let last = *merged.last().unwrap();
            if first + 2.0 * PI - last <= tol {
                merged.pop();
            }
        }
        merged.into_iter().map(|t| Complex64::from_polar(1.0, t)).collect()
    }

    /// Angles where `ϑ` varies fastest on the circle: zero directions and
    /// spectrum points. Used to grade quadrature panels.
    pub fn critical_angles(&self) -> Vec<f64> {
        self.zeros
            .iter()
            .filter(|a| !a.is_origin())
            .map(|a| a.angle())
            .chain(self.atoms.iter().map(|a| a.angle))
            .chain(self.limit_angles.iter().copied())
            .collect()
    }
}

fn tangent_cluster_zero(n: usize) -> Result<BlaschkeZero> {
    let gap = 4f64.powi(-(n as i32)) / n as f64;
    BlaschkeZero::from_polar_gap(2f64.powi(-(n as i32)), gap)
}
