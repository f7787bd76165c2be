//! Holomorphic self-maps of the disk, their Nevanlinna counting functions,
//! and pullback measures `μ_φ(E) = |{t : φ(e^{it}) ∈ E}|`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Location, WhitneyDecomposition};
use crate::poly;

const TAU: f64 = 2.0 * PI;

/// `κ(w) = (1 + iw)/(1 − iw)`, mapping the upper half-plane onto the disk.
pub fn kappa(w: Complex64) -> Complex64 {
    let iw = Complex64::i() * w;
    (1.0 + iw) / (1.0 - iw)
}

/// `κ⁻¹(z) = i(1 − z)/(1 + z)`.
pub fn kappa_inv(z: Complex64) -> Complex64 {
    Complex64::i() * (1.0 - z) / (1.0 + z)
}

/// `κ⁻¹` at `z = (1 − s)e^{it}`, with `1 − z` formed without cancellation.
fn kappa_inv_polar(s: f64, t: f64) -> Complex64 {
    let (sin, cos) = t.sin_cos();
    let half = (0.5 * t).sin();
    let one_minus = Complex64::new(2.0 * half * half + s * cos, -(1.0 - s) * sin);
    let one_plus = Complex64::new(1.0 + (1.0 - s) * cos, (1.0 - s) * sin);
    Complex64::i() * one_minus / one_plus
}

/// Argument in `(−π/2, 3π/2]`, continuous across the negative real axis so
/// that the closed upper half-plane maps to `[0, π]`.
fn arg_upper(w: Complex64) -> f64 {
    let a = w.im.atan2(w.re);
    if a < -0.5 * PI {
        a + TAU
    } else {
        a
    }
}

fn power_upper(w: Complex64, e: f64) -> Complex64 {
    if w == Complex64::new(0.0, 0.0) {
        return w;
    }
    Complex64::from_polar(w.norm().powf(e), e * arg_upper(w))
}

/// A symbol `φ`. The corner model is not a map: it only carries a model
/// of the counting function of a Riemann map onto `U_α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Symbol {
    /// `λ·Π (−ā_k/|a_k|)(z − a_k)/(1 − ā_k z)`.
    FiniteBlaschke {
        zeros: Vec<Complex64>,
        #[serde(default = "unit")]
        unimodular: Complex64,
    },
    /// `center + radius·z`.
    AffineDisk { center: Complex64, radius: f64 },
    /// `ψ_α = κ ∘ (w ↦ w^α) ∘ κ⁻¹`, onto the lens `V_α`.
    SectorMap { alpha: f64 },
    CornerModel { alpha: f64 },
}

fn unit() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl Symbol {
    pub fn blaschke(zeros: &[Complex64]) -> Result<Self> {
        let s = Symbol::FiniteBlaschke {
            zeros: zeros.to_vec(),
            unimodular: unit(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn affine(center: Complex64, radius: f64) -> Result<Self> {
        let s = Symbol::AffineDisk { center, radius };
        s.validate()?;
        Ok(s)
    }

    /// `z ↦ c·z`.
    pub fn scaled(c: f64) -> Result<Self> {
        Self::affine(Complex64::new(0.0, 0.0), c)
    }

    pub fn identity() -> Self {
        Symbol::AffineDisk {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn sector(alpha: f64) -> Result<Self> {
        let s = Symbol::SectorMap { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn corner(alpha: f64) -> Result<Self> {
        let s = Symbol::CornerModel { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Symbol = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Checks the parameter invariants. A zero radius (a constant map) is
    /// allowed here; counting functions reject it.
    pub fn validate(&self) -> Result<()> {
        match self {
            Symbol::FiniteBlaschke { zeros, unimodular } => {
                if zeros.is_empty() {
                    return Err(Error::Parameter("a Blaschke symbol needs a zero".into()));
                }
                if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
                    return Err(Error::Parameter(format!("zero {a} not in the open disk")));
                }
                if (unimodular.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter("Blaschke constant must be unimodular".into()));
                }
            }
            Symbol::AffineDisk { center, radius } => {
                if !(*radius >= 0.0) || center.norm() + radius > 1.0 + 1e-15 {
                    return Err(Error::Parameter(format!(
                        "affine map {center} + {radius}·z does not fit the disk"
                    )));
                }
                if center.norm() >= 1.0 {
                    return Err(Error::Parameter("φ(0) must lie in the open disk".into()));
                }
            }
            Symbol::SectorMap { alpha } | Symbol::CornerModel { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::Parameter(format!("α = {alpha} outside (0, 1)")));
                }
            }
        }
        Ok(())
    }

    pub fn is_map(&self) -> bool {
        !matches!(self, Symbol::CornerModel { .. })
    }

    /// `φ(0)`.
    pub fn origin_image(&self) -> Result<Complex64> {
        Ok(self.eval(Complex64::new(0.0, 0.0))?.0)
    }

    /// `φ(z)` and `φ′(z)` on the closed disk.
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        match self {
            Symbol::FiniteBlaschke { zeros, unimodular } => {
                let mut v = *unimodular;
                let mut d = Complex64::new(0.0, 0.0);
                for a in zeros {
                    let (fv, fd) = blaschke_factor(*a, z)?;
                    d = v * fd + d * fv;
                    v *= fv;
                }
                Ok((v, d))
            }
            Symbol::AffineDisk { center, radius } => {
                Ok((center + radius * z, Complex64::new(*radius, 0.0)))
            }
            Symbol::SectorMap { alpha } => {
                if (1.0 + z).norm() == 0.0 {
                    return Ok((Complex64::new(-1.0, 0.0), Complex64::new(f64::INFINITY, 0.0)));
                }
                let w = kappa_inv(z);
                let u = power_upper(w, *alpha);
                let dk = 2.0 * Complex64::i() / ((1.0 - Complex64::i() * u) * (1.0 - Complex64::i() * u));
                let dw = -2.0 * Complex64::i() / ((1.0 + z) * (1.0 + z));
                let du = if w.norm() == 0.0 {
                    Complex64::new(f64::INFINITY, 0.0)
                } else {
                    *alpha * u / w
                };
                Ok((kappa(u), dk * du * dw))
            }
            Symbol::CornerModel { alpha } => Err(Error::NotAMap(format!(
                "corner model α = {alpha} only provides a counting-function model"
            ))),
        }
    }

    pub fn value(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.eval(z)?.0)
    }

    /// Boundary trace `φ(e^{it})`. For the sector map `κ⁻¹(e^{it})` is
    /// the real number `tan(t/2)`, used directly so that the trace stays
    /// on the lens boundary near `t = 0` and `t = π`.
    pub fn boundary_value(&self, t: f64) -> Result<Complex64> {
        match self {
            Symbol::SectorMap { alpha } => {
                let w = (0.5 * t).tan();
                let u = if w >= 0.0 {
                    Complex64::new(w.powf(*alpha), 0.0)
                } else {
                    Complex64::from_polar((-w).powf(*alpha), alpha * PI)
                };
                // κ(u) = −1 + 2/(1 − iu)
                Ok(-1.0 + 2.0 / (1.0 - Complex64::i() * u))
            }
            _ => self.value(Complex64::from_polar(1.0, t)),
        }
    }

    /// `N_φ(z) = Σ_{φ(ζ) = z} log(1/|ζ|)`.
    pub fn nevanlinna(&self, z: Complex64) -> Result<f64> {
        let r = z.norm();
        self.nevanlinna_polar(1.0 - r, if r == 0.0 { 0.0 } else { z.im.atan2(z.re) })
    }

    /// `N_φ` at `z = (1 − s)e^{it}`; the gap `s` keeps full precision near
    /// the circle for the sector and corner variants.
    pub fn nevanlinna_polar(&self, s: f64, t: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Parameter(format!("gap {s} does not give a point of the open disk")));
        }
        let z = Complex64::from_polar(1.0 - s, t);
        if self.is_map() {
            let p0 = self.origin_image()?;
            if (z - p0).norm() < 1e-14 {
                return Err(Error::Pole {
                    point: z,
                    what: "N_φ is infinite at φ(0)".into(),
                });
            }
        }
        match self {
            Symbol::FiniteBlaschke { .. } => {
                let roots = self.preimages(z)?;
                Ok(roots
                    .iter()
                    .filter(|w| w.norm() < 1.0)
                    .map(|w| -w.norm().ln())
                    .sum())
            }
            Symbol::AffineDisk { center, radius } => {
                if *radius == 0.0 {
                    return Err(Error::Parameter("constant symbol: N_φ undefined".into()));
                }
                let d = (z - center).norm();
                if d >= *radius {
                    return Ok(0.0);
                }
                // 1 − |ζ|² = (r − d)(r + d)/r²
                let defect = (radius - d) * (radius + d) / (radius * radius);
                Ok(-0.5 * (-defect).ln_1p())
            }
            Symbol::SectorMap { alpha } => Ok(sector_nevanlinna(*alpha, s, t)),
            Symbol::CornerModel { alpha } => Ok(corner_nevanlinna(*alpha, s, t)),
        }
    }

    /// All roots of `φ(ζ) = z` for a Blaschke symbol (degree many).
    pub fn preimages(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let Symbol::FiniteBlaschke { zeros, unimodular } = self else {
            return Err(Error::Parameter("preimage polynomial needs a Blaschke symbol".into()));
        };
        let coeffs = self.preimage_polynomial(zeros, *unimodular, z);
        let roots = poly::roots(&coeffs)?;
        let worst = roots
            .iter()
            .map(|w| self.value(*w).map(|v| (v - z).norm()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        if !(worst < 1e-8) {
            return Err(Error::numeric(
                "Blaschke preimages",
                format!("residual {worst:e} at z = {z}"),
            ));
        }
        Ok(roots)
    }

    /// Coefficients (ascending) of `λ·P(ζ) − z·Q(ζ)`, where `φ = λP/Q`.
    fn preimage_polynomial(&self, zeros: &[Complex64], lambda: Complex64, z: Complex64) -> Vec<Complex64> {
        let mut p = vec![lambda];
        let mut q = vec![Complex64::new(1.0, 0.0)];
        for a in zeros {
            let (lin, den) = if a.norm() == 0.0 {
                (
                    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
                    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                )
            } else {
                let u = -a.conj() / a.norm();
                ([-u * a, u], [Complex64::new(1.0, 0.0), -a.conj()])
            };
            p = poly::multiply(&p, &lin);
            q = poly::multiply(&q, &den);
        }
        p.iter().zip(&q).map(|(pk, qk)| pk - z * qk).collect()
    }

    /// Argument-principle count of preimages of `z`: cells of a polar grid
    /// over the disk are refined while their boundary winding number is
    /// nonzero; each located root contributes `log(1/|ζ|)` per multiplicity.
    pub fn nevanlinna_oracle(&self, z: Complex64, grid: usize) -> Result<f64> {
        if !self.is_map() {
            return Err(Error::NotAMap("oracle needs a map".into()));
        }
        let p0 = self.origin_image()?;
        if (z - p0).norm() < 1e-6 {
            return Err(Error::Pole {
                point: z,
                what: "oracle point too close to φ(0)".into(),
            });
        }
        let n = grid.max(2);
        let mut last = None;
        // offsets keep grid lines off the symmetry axes of typical examples
        for (ts, rs) in [(0.1234567, 0.3271), (0.371, 0.577), (0.618, 0.1414)] {
            match self.oracle_pass(z, n, ts, rs) {
                Err(e @ Error::OracleInconclusive { .. }) => last = Some(e),
                other => return other,
            }
        }
        Err(last.expect("at least one pass"))
    }

    fn oracle_pass(&self, z: Complex64, n: usize, ts: f64, rs: f64) -> Result<f64> {
        let mut radii = vec![0.0];
        radii.extend((0..n).map(|i| (i as f64 + rs) / n as f64));
        radii.push(1.0);
        let mut total = 0.0;
        for w in radii.windows(2) {
            for j in 0..n {
                let cell = Cell {
                    r0: w[0],
                    r1: w[1],
                    t0: TAU * (j as f64 + ts) / n as f64,
                    t1: TAU * (j as f64 + 1.0 + ts) / n as f64,
                };
                total += self.count_in_cell(z, cell, 0)?;
            }
        }
        Ok(total)
    }

    fn count_in_cell(&self, z: Complex64, cell: Cell, depth: usize) -> Result<f64> {
        let wind = self.winding(z, &cell)?;
        if wind == 0 {
            return Ok(0.0);
        }
        let size = (cell.r1 - cell.r0).max(cell.r1 * (cell.t1 - cell.t0));
        if size < 1e-11 || depth > 60 {
            let center = Complex64::from_polar(0.5 * (cell.r0 + cell.r1), 0.5 * (cell.t0 + cell.t1));
            if center.norm() >= 1.0 {
                return Ok(0.0);
            }
            return Ok(wind as f64 * -center.norm().ln());
        }
        let rm = 0.5 * (cell.r0 + cell.r1);
        let tm = 0.5 * (cell.t0 + cell.t1);
        let mut acc = 0.0;
        for (r0, r1) in [(cell.r0, rm), (rm, cell.r1)] {
            for (t0, t1) in [(cell.t0, tm), (tm, cell.t1)] {
                acc += self.count_in_cell(z, Cell { r0, r1, t0, t1 }, depth + 1)?;
            }
        }
        Ok(acc)
    }

    /// Bound on `|φ′|` over `|w| ≤ r`, where one is available in closed form.
    fn lipschitz_bound(&self, r: f64) -> Option<f64> {
        match self {
            Symbol::FiniteBlaschke { zeros, .. } => Some(
                zeros
                    .iter()
                    .map(|a| {
                        let m = a.norm();
                        (1.0 - m * m) / ((1.0 - m * r) * (1.0 - m * r))
                    })
                    .sum(),
            ),
            Symbol::AffineDisk { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Winding number of `φ − z` around the boundary of a polar cell.
    fn winding(&self, z: Complex64, cell: &Cell) -> Result<i64> {
        let corners = [
            (cell.r0, cell.t0),
            (cell.r1, cell.t0),
            (cell.r1, cell.t1),
            (cell.r0, cell.t1),
        ];
        let mut total = 0.0;
        for k in 0..4 {
            let (ra, ta) = corners[k];
            let (rb, tb) = corners[(k + 1) % 4];
            if ra == 0.0 && rb == 0.0 {
                continue;
            }
            total += self.edge_winding(z, (ra, ta), (rb, tb), 0)?;
        }
        Ok((total / TAU).round() as i64)
    }

    fn edge_winding(&self, z: Complex64, a: (f64, f64), b: (f64, f64), depth: usize) -> Result<f64> {
        let pa = self.value(Complex64::from_polar(a.0, a.1))? - z;
        let pb = self.value(Complex64::from_polar(b.0, b.1))? - z;
        if pa.norm() < 1e-15 || pb.norm() < 1e-15 {
            return Err(Error::OracleInconclusive {
                point: z,
                detail: "preimage on a cell boundary".into(),
            });
        }
        let d = (pb / pa).arg();
        let len = (b.0 - a.0).abs() + a.0.max(b.0) * (b.1 - a.1).abs();
        let near = pa.norm().min(pb.norm());
        // the image path stays within L·len of pa, so it cannot wind
        // around z once L·len < |pa|
        let resolved = match self.lipschitz_bound(a.0.max(b.0)) {
            Some(l) => l * len < 0.9 * near,
            None => {
                let da = self.eval(Complex64::from_polar(a.0, a.1))?.1.norm();
                let db = self.eval(Complex64::from_polar(b.0, b.1))?.1.norm();
                let slope_ok = !(da.is_finite() && db.is_finite()) || 2.0 * da.max(db) * len < near;
                d.abs() <= 0.5 && slope_ok
            }
        };
        if resolved {
            return Ok(d);
        }
        if depth > 48 {
            return Err(Error::OracleInconclusive {
                point: z,
                detail: "edge winding unresolved at maximum refinement".into(),
            });
        }
        let m = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
        Ok(self.edge_winding(z, a, m, depth + 1)? + self.edge_winding(z, m, b, depth + 1)?)
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    r0: f64,
    r1: f64,
    t0: f64,
    t1: f64,
}

fn blaschke_factor(a: Complex64, z: Complex64) -> Result<(Complex64, Complex64)> {
    if a.norm() == 0.0 {
        return Ok((z, Complex64::new(1.0, 0.0)));
    }
    let den = 1.0 - a.conj() * z;
    if den.norm() < 1e-300 {
        return Err(Error::Pole {
            point: z,
            what: format!("reflection of the symbol zero {a}"),
        });
    }
    let u = -a.conj() / a.norm();
    Ok((u * (z - a) / den, u * (1.0 - a.norm_sqr()) / (den * den)))
}

/// `N_{ψ_α}` at `(1 − s)e^{it}`: with `W = (κ⁻¹ z)^{1/α}`,
/// `N = ½·log(1 + 4·Im W/|1 + iW|²)` when `arg κ⁻¹z ∈ (0, πα)`, else 0.
pub fn sector_nevanlinna(alpha: f64, s: f64, t: f64) -> f64 {
    let w = kappa_inv_polar(s, t);
    let a = arg_upper(w);
    if !(a > 0.0 && a < PI * alpha) {
        return 0.0;
    }
    let big_w = power_upper(w, 1.0 / alpha);
    let den = (1.0 + Complex64::i() * big_w).norm_sqr();
    0.5 * (4.0 * big_w.im / den).ln_1p()
}

/// Distance from `z` to `γ_α = κ({ρe^{iπα} : ρ > 0})`, an arc from −1 to 1
/// (the real diameter when `α = 1/2`).
fn gamma_distance(alpha: f64, z: Complex64) -> f64 {
    let z1 = kappa(Complex64::from_polar(1.0, PI * alpha));
    if z1.im.abs() < 1e-12 {
        let x = z.re.clamp(-1.0, 1.0);
        return (z - x).norm();
    }
    let (c, big_r) = gamma_circle(z1);
    let foot = c + (z - c) * (big_r / (z - c).norm());
    if foot.norm() <= 1.0 {
        ((z - c).norm() - big_r).abs()
    } else {
        (z - 1.0).norm().min((z + 1.0).norm())
    }
}

/// Circle through −1, 1 and `z1`: center `i·y₀`, radius.
fn gamma_circle(z1: Complex64) -> (Complex64, f64) {
    let y0 = (z1.norm_sqr() - 1.0) / (2.0 * z1.im);
    (Complex64::new(0.0, y0), (1.0 + y0 * y0).sqrt())
}

/// `1 − r` along `τ`: `e^{−1/θ}` on `(0, π/2]`, frozen at `θ = π/2` beyond.
fn tau_gap(theta: f64) -> f64 {
    (-1.0 / theta.min(0.5 * PI)).exp()
}

/// `|(1 − s)e^{it} − (1 − g)e^{iθ}|` without cancellation.
fn polar_distance(s: f64, t: f64, g: f64, theta: f64) -> f64 {
    let h = (0.5 * (t - theta)).sin();
    ((s - g) * (s - g) + 4.0 * (1.0 - s) * (1.0 - g) * h * h).sqrt()
}

/// Angle reduced to `(−π, π]`.
fn wrap_angle(t: f64) -> f64 {
    let r = t - TAU * (t / TAU).round();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Membership in the model corner domain `U_α ⊂ V_α`: below the real axis
/// only `V_α` constrains; above it the point must also lie inside `τ`.
pub fn in_corner_domain(alpha: f64, s: f64, t: f64) -> bool {
    let t = wrap_angle(t);
    if !(s > 0.0 && s <= 1.0) {
        return false;
    }
    let a = arg_upper(kappa_inv_polar(s, t));
    if !(a > 0.0 && a < PI * alpha) {
        return false;
    }
    t <= 0.0 || s > tau_gap(t)
}

/// Distance from `(1 − s)e^{it}` to `∂U_α = γ_α ∪ τ`.
pub fn corner_boundary_distance(alpha: f64, s: f64, t: f64) -> f64 {
    let t = wrap_angle(t);
    let z = Complex64::from_polar(1.0 - s, t);
    let to_gamma = gamma_distance(alpha, z);
    // τ, parametrized by θ ∈ (0, π]: scan then golden-section refinement
    let f = |theta: f64| polar_distance(s, t, tau_gap(theta), theta);
    let mut grid: Vec<f64> = (0..64).map(|k| 1e-3 * (PI / 1e-3).powf(k as f64 / 63.0)).collect();
    if t > 0.0 && t <= PI {
        grid.push(t);
    }
    grid.sort_by(f64::total_cmp);
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for (i, &th) in grid.iter().enumerate() {
        let v = f(th);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { 0.0 } else { grid[best_i - 1] };
    let hi = if best_i + 1 < grid.len() { grid[best_i + 1] } else { PI };
    let (mut a, mut b) = (lo, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1.max(1e-300)) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let refined = f((0.5 * (a + b)).max(1e-300));
    let to_one = polar_distance(s, t, 0.0, 0.0);
    to_gamma.min(best).min(refined).min(to_one)
}

/// Model `N(z) = dist(z, ∂U_α)·|z − 1|^{1/α − 1}` on `U_α`, 0 elsewhere.
pub fn corner_nevanlinna(alpha: f64, s: f64, t: f64) -> f64 {
    if !in_corner_domain(alpha, s, t) {
        return 0.0;
    }
    let to_one = polar_distance(s, t, 0.0, 0.0);
    corner_boundary_distance(alpha, s, t) * to_one.powf(1.0 / alpha - 1.0)
}

/// Masses of a measure collected on the members of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMass {
    pub fingerprint: u64,
    pub boxes: BTreeMap<usize, f64>,
    pub residual: BTreeMap<usize, f64>,
    /// Mass in `|z| ≤ 1/2`.
    pub core: f64,
    /// Points pulled back onto the circle after rounding outside it.
    pub clamped: usize,
}

/// Finite positive measure: point masses, or masses per decomposition box.
#[derive(Debug, Clone, PartialEq)]
pub enum EmpiricalMeasure {
    Atoms(Vec<(Complex64, f64)>),
    Binned(BinnedMass),
}

impl EmpiricalMeasure {
    pub fn empty_on(dec: &WhitneyDecomposition) -> Self {
        EmpiricalMeasure::Binned(BinnedMass {
            fingerprint: dec.fingerprint(),
            boxes: BTreeMap::new(),
            residual: BTreeMap::new(),
            core: 0.0,
            clamped: 0,
        })
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            EmpiricalMeasure::Atoms(a) => a.iter().map(|(_, m)| m).sum(),
            EmpiricalMeasure::Binned(b) => {
                b.boxes.values().sum::<f64>() + b.residual.values().sum::<f64>() + b.core
            }
        }
    }

    /// Mass of a set given by its indicator.
    pub fn mass_where(&self, inside: impl Fn(Complex64) -> bool) -> Result<f64> {
        match self {
            EmpiricalMeasure::Atoms(a) => Ok(a.iter().filter(|(z, _)| inside(*z)).map(|(_, m)| m).sum()),
            EmpiricalMeasure::Binned(_) => Err(Error::Parameter(
                "set masses need an atomic measure".into(),
            )),
        }
    }

    /// Bins point masses on a decomposition; points outside the closed
    /// disk are clamped to the circle with a warning.
    pub fn bin(&self, dec: &WhitneyDecomposition) -> Result<EmpiricalMeasure> {
        let EmpiricalMeasure::Atoms(atoms) = self else {
            return Err(Error::Parameter("measure is already binned".into()));
        };
        let mut out = BinnedMass {
            fingerprint: dec.fingerprint(),
            boxes: BTreeMap::new(),
            residual: BTreeMap::new(),
            core: 0.0,
            clamped: 0,
        };
        for &(z, m) in atoms {
            deposit(&mut out, dec, z, m);
        }
        if out.clamped > 0 {
            log::warn!("{} pullback points clamped onto the unit circle", out.clamped);
        }
        Ok(EmpiricalMeasure::Binned(out))
    }

    pub fn binned(&self) -> Option<&BinnedMass> {
        match self {
            EmpiricalMeasure::Binned(b) => Some(b),
            EmpiricalMeasure::Atoms(_) => None,
        }
    }

    /// Writes `bin_id, mass`: `b<i>` for boxes, `r<i>` for residual squares,
    /// `core` for `|z| ≤ 1/2`, `a<i>` for atoms.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_id", "mass"])?;
        match self {
            EmpiricalMeasure::Atoms(a) => {
                for (i, (_, m)) in a.iter().enumerate() {
                    w.write_record([format!("a{i}"), format!("{m:e}")])?;
                }
            }
            EmpiricalMeasure::Binned(b) => {
                for (i, m) in &b.boxes {
                    w.write_record([format!("b{i}"), format!("{m:e}")])?;
                }
                for (i, m) in &b.residual {
                    w.write_record([format!("r{i}"), format!("{m:e}")])?;
                }
                w.write_record(["core".to_string(), format!("{:e}", b.core)])?;
            }
        }
        w.flush().map_err(|e| Error::io("csv stream", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn deposit(out: &mut BinnedMass, dec: &WhitneyDecomposition, mut z: Complex64, m: f64) {
    if z.norm() > 1.0 {
        out.clamped += 1;
        z /= z.norm();
        if z.norm() > 1.0 {
            z *= 1.0 - f64::EPSILON;
        }
    }
    match dec.locate(z) {
        Location::Box(i) => *out.boxes.entry(i).or_insert(0.0) += m,
        Location::Residual(i) => *out.residual.entry(i).or_insert(0.0) += m,
        Location::Core | Location::Outside => out.core += m,
    }
}

/// Boundary pushforward with the uniform rule: `nodes` points
/// `t_k = 2πk/nodes`, each of mass `2π/nodes`.
pub fn pullback_atoms(s: &Symbol, nodes: usize) -> Result<EmpiricalMeasure> {
    if nodes < 64 {
        return Err(Error::Parameter("pullback needs at least 64 nodes".into()));
    }
    let w = TAU / nodes as f64;
    let atoms = (0..nodes)
        .map(|k| {
            let t = TAU * k as f64 / nodes as f64;
            Ok((s.boundary_value(t)?, w))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalMeasure::Atoms(atoms))
}

/// `μ_φ` binned on `dec` with the uniform node rule.
pub fn pullback_measure(s: &Symbol, nodes: usize, dec: &WhitneyDecomposition) -> Result<EmpiricalMeasure> {
    pullback_atoms(s, nodes)?.bin(dec)
}

/// `μ_φ` binned on `dec` by adaptive bisection of the parameter circle:
/// an interval is assigned whole once both end images and the midpoint
/// image fall in one member and the image chord is small against it.
/// Resolves the tiny boxes near boundary contact points that a uniform
/// rule cannot reach.
pub fn pullback_measure_adaptive(s: &Symbol, dec: &WhitneyDecomposition, base: usize) -> Result<EmpiricalMeasure> {
    let mut out = BinnedMass {
        fingerprint: dec.fingerprint(),
        boxes: BTreeMap::new(),
        residual: BTreeMap::new(),
        core: 0.0,
        clamped: 0,
    };
    let n = base.max(64);
    let image = |t: f64| s.boundary_value(t).map(snap_real);
    let mut budget: usize = 50_000_000;
    for k in 0..n {
        let t0 = TAU * k as f64 / n as f64;
        let t1 = TAU * (k + 1) as f64 / n as f64;
        let mut stack = vec![(t0, t1, image(t0)?, image(t1)?, 0usize)];
        while let Some((a, b, za, zb, depth)) = stack.pop() {
            budget = budget.checked_sub(1).ok_or_else(|| {
                Error::numeric("adaptive pullback", "bisection budget exhausted")
            })?;
            let m = 0.5 * (a + b);
            let zm = image(m)?;
            let la = locate_clamped(dec, za);
            let lb = locate_clamped(dec, zb);
            let lm = locate_clamped(dec, zm);
            let size = member_size(dec, lm);
            let settled = la == lb && lb == lm && (zb - za).norm() <= 0.25 * size;
            if settled || depth >= 200 || b - a <= 1e-300 {
                deposit(&mut out, dec, zm, b - a);
            } else {
                stack.push((m, b, zm, zb, depth + 1));
                stack.push((a, m, za, zm, depth + 1));
            }
        }
    }
    Ok(EmpiricalMeasure::Binned(out))
}

/// Image points within rounding of the real axis are put on it, so that
/// curves running along the axis fall on one side of the cell seam.
fn snap_real(z: Complex64) -> Complex64 {
    if z.im.abs() <= 16.0 * f64::EPSILON {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

fn locate_clamped(dec: &WhitneyDecomposition, z: Complex64) -> Location {
    let z = if z.norm() > 1.0 { z / z.norm() * (1.0 - f64::EPSILON) } else { z };
    dec.locate(z)
}

fn member_size(dec: &WhitneyDecomposition, loc: Location) -> f64 {
    match loc {
        Location::Box(i) => dec.boxes()[i].diameter(),
        Location::Residual(i) => dec.residual()[i].diameter(),
        Location::Core | Location::Outside => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_whitney, DyadicBox, WhitneyParams};
    use crate::inner::InnerFunction;
    use crate::level::level_boundary;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluation_examples() {
        let half = Symbol::affine(c(0.5, 0.0), 0.5).unwrap();
        assert!((half.value(c(0.0, 1.0)).unwrap() - c(0.5, 0.5)).norm() < 1e-15);
        let sec = Symbol::sector(0.5).unwrap();
        let expected = kappa(Complex64::from_polar(1.0, PI / 4.0));
        assert!((sec.value(c(0.0, 0.0)).unwrap() - expected).norm() < 1e-15);
        let b = Symbol::blaschke(&[c(0.5, 0.0)]).unwrap();
        assert!(b.value(c(0.5, 0.0)).unwrap().norm() < 1e-15);
        assert!(matches!(
            Symbol::corner(0.5).unwrap().eval(c(0.1, 0.0)),
            Err(Error::NotAMap(_))
        ));
    }

    #[test]
    fn boundary_trace_matches_value() {
        for sym in [Symbol::sector(0.4).unwrap(), Symbol::affine(Complex64::new(0.5, 0.0), 0.5).unwrap()] {
            for k in 1..50 {
                let t = -3.0 + 0.12 * k as f64;
                let a = sym.boundary_value(t).unwrap();
                let b = sym.value(Complex64::from_polar(1.0, t)).unwrap();
                assert!((a - b).norm() < 1e-12, "{t}: {a} vs {b}");
            }
        }
        // near t = 0 from below the trace is on the arc, not the half circle
        let z = Symbol::sector(0.5).unwrap().boundary_value(-1e-14).unwrap();
        assert!(z.im.abs() < 1e-15 && z.re < 1.0);
    }

    #[test]
    fn sector_map_derivative() {
        let sec = Symbol::sector(0.3).unwrap();
        let z = c(0.2, -0.4);
        let h = 1e-6;
        let fd = (sec.value(z + h).unwrap() - sec.value(z - h).unwrap()) / (2.0 * h);
        let (_, d) = sec.eval(z).unwrap();
        assert!((fd - d).norm() < 1e-7 * d.norm());
    }

    #[test]
    fn sector_image_is_the_lens() {
        // boundary goes to the upper half circle and the arc γ_α
        for alpha in [0.3, 0.5, 0.8] {
            let sec = Symbol::sector(alpha).unwrap();
            for k in 1..200 {
                let t = -PI + TAU * k as f64 / 200.0;
                let v = sec.value(Complex64::from_polar(1.0, t)).unwrap();
                let on_circle = (v.norm() - 1.0).abs() < 1e-9 && v.im >= -1e-9;
                let on_arc = gamma_distance(alpha, v) < 1e-9;
                assert!(on_circle || on_arc, "α={alpha} t={t} v={v}");
            }
        }
    }

    #[test]
    fn nevanlinna_examples() {
        let id = Symbol::identity();
        assert!((id.nevanlinna(c(0.5, 0.0)).unwrap() - 2f64.ln()).abs() < 1e-15);
        let sq = Symbol::blaschke(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((sq.nevanlinna(c(0.25, 0.0)).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
        let half = Symbol::affine(c(0.5, 0.0), 0.5).unwrap();
        let n = half.nevanlinna(c(0.6, 0.0)).unwrap();
        assert!((n + (2.0f64 * 0.6 - 1.0).abs().ln()).abs() < 1e-14);
        assert!((n - 1.6094).abs() < 1e-4);
        let cz = Symbol::scaled(0.5).unwrap();
        assert!((cz.nevanlinna(c(0.25, 0.0)).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(cz.nevanlinna(c(0.7, 0.0)).unwrap(), 0.0);
        assert!(matches!(half.nevanlinna(c(0.5, 0.0)), Err(Error::Pole { .. })));
        assert!(Symbol::affine(c(0.3, 0.0), 0.0).unwrap().nevanlinna(c(0.1, 0.0)).is_err());
    }

    #[test]
    fn sector_nevanlinna_inverts_the_map() {
        let alpha = 0.4;
        let sec = Symbol::sector(alpha).unwrap();
        for zeta in [c(0.3, 0.2), c(-0.5, 0.1), c(0.9, -0.3), c(0.0, -0.95)] {
            let z = sec.value(zeta).unwrap();
            let n = sec.nevanlinna(z).unwrap();
            assert!((n + zeta.norm().ln()).abs() < 1e-10, "{zeta}: {n}");
        }
        // points outside V_α are not covered
        assert_eq!(sec.nevanlinna(c(0.0, -0.5)).unwrap(), 0.0);
    }

    #[test]
    fn vieta_product_matches_roots() {
        let zeros = [c(0.3, 0.4), c(-0.2, 0.1), c(0.0, -0.6)];
        let b = Symbol::blaschke(&zeros).unwrap();
        let z = c(0.1, 0.35);
        let Symbol::FiniteBlaschke { zeros, unimodular } = &b else { unreachable!() };
        let coeffs = b.preimage_polynomial(zeros, *unimodular, z);
        let d = coeffs.len() - 1;
        let prod = coeffs[0] / coeffs[d] * if d % 2 == 1 { -1.0 } else { 1.0 };
        let n = b.nevanlinna(z).unwrap();
        assert!((n + prod.norm().ln()).abs() < 1e-12);
        // a degree-3 Blaschke product covers every point three times
        assert_eq!(b.preimages(z).unwrap().iter().filter(|w| w.norm() < 1.0).count(), 3);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let sq = Symbol::blaschke(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let n = sq.nevanlinna_oracle(c(0.25, 0.0), 8).unwrap();
        assert!((n - 2.0 * 2f64.ln()).abs() < 1e-6, "{n}");
        let id = Symbol::identity();
        assert!((id.nevanlinna_oracle(c(0.5, 0.0), 8).unwrap() - 2f64.ln()).abs() < 1e-6);
        let half = Symbol::affine(c(0.5, 0.0), 0.5).unwrap();
        let z = c(0.7, 0.2);
        let exact = -(2.0 * z - 1.0).norm().ln();
        assert!((half.nevanlinna_oracle(z, 8).unwrap() - exact).abs() < 1e-6);
        let sec = Symbol::sector(0.5).unwrap();
        let z = c(0.2, 0.5);
        let a = sec.nevanlinna(z).unwrap();
        let b = sec.nevanlinna_oracle(z, 8).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn corner_model_lives_in_the_corner() {
        let alpha = 0.5;
        // far from the circle inside V_{1/2}: positive
        assert!(corner_nevanlinna(alpha, 0.5, 0.5) > 0.0);
        // below the real axis V_{1/2} is empty
        assert_eq!(corner_nevanlinna(alpha, 0.1, -0.3), 0.0);
        // between τ and the circle: excluded
        assert_eq!(corner_nevanlinna(alpha, 1e-6, 0.2), 0.0);
        // N/(1 − |z|) → 0 toward 1 along a ray into the corner
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&s| corner_nevanlinna(alpha, s, 3.0 * s) / s)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    }

    #[test]
    fn corner_distance_against_brute_force() {
        let alpha = 0.5;
        for (s, t) in [(0.05, 0.3), (0.2, 1.0), (0.01, 0.05), (0.3, 2.5)] {
            let mut best = f64::INFINITY;
            for k in 1..=200_000 {
                let th = PI * k as f64 / 200_000.0;
                best = best.min(polar_distance(s, t, tau_gap(th), th));
                // γ_{1/2} is the real diameter
                let x = -1.0 + 2.0 * k as f64 / 200_000.0;
                best = best.min((Complex64::from_polar(1.0 - s, t) - x).norm());
            }
            let d = corner_boundary_distance(alpha, s, t);
            assert!((d - best).abs() < 1e-4 * best.max(1e-3), "({s},{t}): {d} vs {best}");
        }
    }

    #[test]
    fn pullback_examples() {
        let f = InnerFunction::power(1).unwrap();
        let dom = level_boundary(&f, 2.0, 1e-3).unwrap();
        let dec = build_whitney(&dom, WhitneyParams::default()).unwrap();
        // an odd node count keeps nodes off the quadrant lines except t = 0
        let nodes = 1023;
        let node = TAU / nodes as f64;
        let mu = pullback_measure(&Symbol::identity(), nodes, &dec).unwrap();
        let b = mu.binned().unwrap();
        assert_eq!(b.boxes.len(), 4);
        for m in b.boxes.values() {
            assert!((m - PI / 2.0).abs() <= node);
        }
        assert!((mu.total_mass() - TAU).abs() < 1e-12);
        let sq = Symbol::blaschke(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let mu2 = pullback_measure(&sq, nodes, &dec).unwrap();
        for (i, m) in &mu2.binned().unwrap().boxes {
            assert!((m - b.boxes[i]).abs() <= 1.01 * node);
        }
    }

    #[test]
    fn pullback_refinement_is_consistent() {
        let dec = WhitneyDecomposition::dyadic_grid(5);
        let half = Symbol::affine(c(0.5, 0.0), 0.5).unwrap();
        let coarse = pullback_measure(&half, 1 << 14, &dec).unwrap();
        let fine = pullback_measure(&half, 10 << 14, &dec).unwrap();
        let adaptive = pullback_measure_adaptive(&half, &dec, 256).unwrap();
        let (c, f, a) = (coarse.binned().unwrap(), fine.binned().unwrap(), adaptive.binned().unwrap());
        // each box meets the image circle in one arc: two boundary nodes of error
        let (hc, hf) = (TAU / (1 << 14) as f64, TAU / (10 << 14) as f64);
        for (i, mf) in &f.boxes {
            let mc = c.boxes.get(i).copied().unwrap_or(0.0);
            let ma = a.boxes.get(i).copied().unwrap_or(0.0);
            assert!((mc - mf).abs() <= 2.0 * (hc + hf), "box {i}: {mc} vs {mf}");
            assert!((ma - mf).abs() <= 2.0 * hf + 1e-12, "box {i}: {ma} vs {mf}");
        }
        assert!((adaptive.total_mass() - TAU).abs() < 1e-12);
        // bins are only hit along the image circle |w − 1/2| = 1/2
        for i in a.boxes.keys() {
            let sector = dec.boxes()[*i].region.sector();
            let (pts, _) = sector.boundary_samples(1e-3);
            let dmin = pts.iter().map(|p| ((p - 0.5).norm() - 0.5).abs()).fold(f64::INFINITY, f64::min);
            assert!(dmin < 1e-3);
        }
    }

    #[test]
    fn binned_measure_export() {
        let dec = WhitneyDecomposition::dyadic_grid(1);
        let mu = EmpiricalMeasure::Atoms(vec![(c(0.9, 0.0), 2.0), (c(0.1, 0.0), 1.0)]).bin(&dec).unwrap();
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_id,mass\n"));
        assert!(text.contains("core,1e0"));
        let _ = DyadicBox::square(0, 0);
    }

    #[test]
    fn json_round_trip() {
        for s in [
            Symbol::scaled(0.5).unwrap(),
            Symbol::sector(0.5).unwrap(),
            Symbol::blaschke(&[c(0.1, 0.2)]).unwrap(),
            Symbol::corner(0.25).unwrap(),
        ] {
            let back = Symbol::from_json(&s.to_json().unwrap()).unwrap();
            assert_eq!(back, s);
        }
        let s = Symbol::from_json(r#"{"variant":"affine_disk","center":[0.5,0.0],"radius":0.5}"#).unwrap();
        assert_eq!(s, Symbol::affine(c(0.5, 0.0), 0.5).unwrap());
        assert!(Symbol::from_json(r#"{"variant":"affine_disk","center":[0.5,0.0],"radius":0.9}"#).is_err());
    }
}
