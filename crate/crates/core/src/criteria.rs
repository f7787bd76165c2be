//! Scalar Schatten criteria for `C_φ : K_ϑ → H²`: compactness ratios,
//! discrete Luecking sums, integral tests over dyadic shells, the
//! Hilbert–Schmidt formula and its bounds, and Berezin-type tests.
//!
//! Integral criteria are reported shell by shell over
//! `1 − 2^{−k} ≤ |z| < 1 − 2^{−k−1}`; the area measure is normalized to
//! total mass 1 on the disk.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::WhitneyDecomposition;
use crate::inner::{DiskPoint, InnerFunction};
use crate::level::LevelDomain;
use crate::quadrature::{circle_average, integrate_2d, Adaptive};
use crate::symbols::{BinnedMass, EmpiricalMeasure, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Converging => "converging",
            Verdict::Diverging => "diverging",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Increment-ratio rule. Converging: the last `window` ratios
/// `I_k/I_{k−stride}` are all below `ratio^stride`. Diverging: the last
/// `window` increments all reach the median of the first half.
///
/// `stride > 1` compares increments one period apart when the integrand
/// has features recurring every `stride` shells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictRule {
    pub window: usize,
    pub ratio: f64,
    pub stride: usize,
}

impl Default for VerdictRule {
    fn default() -> Self {
        VerdictRule {
            window: 5,
            ratio: 0.9,
            stride: 1,
        }
    }
}

impl VerdictRule {
    /// Verdict and its statistic: the largest tail ratio when converging,
    /// otherwise the smallest tail increment over the first-half median.
    pub fn apply(&self, increments: &[f64]) -> (Verdict, f64) {
        let n = increments.len();
        let stride = self.stride.max(1);
        if n < self.window + stride || self.window == 0 {
            return (Verdict::Inconclusive, f64::NAN);
        }
        let tail_ratio = (n - self.window..n)
            .map(|k| {
                let (a, b) = (increments[k - stride], increments[k]);
                if b == 0.0 {
                    0.0
                } else if a == 0.0 {
                    f64::INFINITY
                } else {
                    b / a
                }
            })
            .fold(0.0f64, f64::max);
        if tail_ratio < self.ratio.powi(stride as i32) {
            return (Verdict::Converging, tail_ratio);
        }
        let mut head: Vec<f64> = increments[..n / 2].to_vec();
        head.sort_by(f64::total_cmp);
        let median = if head.len() % 2 == 1 {
            head[head.len() / 2]
        } else {
            0.5 * (head[head.len() / 2 - 1] + head[head.len() / 2])
        };
        let tail_min = increments[n - self.window..].iter().copied().fold(f64::INFINITY, f64::min);
        let stat = tail_min / median;
        if median > 0.0 && tail_min >= median {
            (Verdict::Diverging, stat)
        } else {
            (Verdict::Inconclusive, tail_ratio)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shell {
    pub index: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub increment: f64,
    pub cumulative: f64,
    /// Quadrature error estimate for the increment.
    pub error: f64,
    /// False when quadrature failed or hit an evaluation error.
    pub ok: bool,
}

/// Shell-by-shell record of an integral or series criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellReport {
    pub label: String,
    pub shells: Vec<Shell>,
    pub verdict: Verdict,
    pub statistic: f64,
    pub notes: Vec<String>,
}

impl ShellReport {
    /// Builds the report from increments; flagged shells inside the rule's
    /// window make the verdict inconclusive.
    pub fn from_increments(
        label: impl Into<String>,
        rows: Vec<(f64, f64, f64, f64, bool)>,
        rule: VerdictRule,
        notes: Vec<String>,
    ) -> Self {
        let mut cumulative = 0.0;
        let shells: Vec<Shell> = rows
            .into_iter()
            .enumerate()
            .map(|(index, (inner_radius, outer_radius, increment, error, ok))| {
                cumulative += increment;
                Shell {
                    index,
                    inner_radius,
                    outer_radius,
                    increment,
                    cumulative,
                    error,
                    ok,
                }
            })
            .collect();
        let increments: Vec<f64> = shells.iter().map(|s| s.increment).collect();
        let (mut verdict, statistic) = rule.apply(&increments);
        let n = shells.len();
        if shells[n.saturating_sub(rule.window + 1)..].iter().any(|s| !s.ok) {
            verdict = Verdict::Inconclusive;
        }
        ShellReport {
            label: label.into(),
            shells,
            verdict,
            statistic,
            notes,
        }
    }

    pub fn total(&self) -> f64 {
        self.shells.last().map_or(0.0, |s| s.cumulative)
    }

    pub fn increments(&self) -> Vec<f64> {
        self.shells.iter().map(|s| s.increment).collect()
    }

    /// Cumulative value, or `+∞` for a diverging verdict.
    pub fn value_or_inf(&self) -> f64 {
        match self.verdict {
            Verdict::Diverging => f64::INFINITY,
            _ => self.total(),
        }
    }

    /// CSV columns `shell_index, inner_radius, outer_radius, increment,
    /// cumulative, verdict_flag`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "shell_index",
            "inner_radius",
            "outer_radius",
            "increment",
            "cumulative",
            "verdict_flag",
        ])?;
        for s in &self.shells {
            w.write_record([
                s.index.to_string(),
                format!("{:.17e}", s.inner_radius),
                format!("{:.17e}", s.outer_radius),
                format!("{:.17e}", s.increment),
                format!("{:.17e}", s.cumulative),
                (if s.ok { "ok" } else { "inconclusive" }).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("csv stream", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// `{ "experiment", "params", "verdict", "value_or_inf" }`; infinity is
    /// written as the string `"inf"`.
    pub fn summary_json(&self, experiment: &str, params: serde_json::Value) -> serde_json::Value {
        let v = self.value_or_inf();
        serde_json::json!({
            "experiment": experiment,
            "params": params,
            "verdict": self.verdict.label(),
            "value_or_inf": if v.is_finite() { serde_json::json!(v) } else { serde_json::json!("inf") },
            "statistic": if self.statistic.is_finite() { serde_json::json!(self.statistic) } else { serde_json::Value::Null },
            "label": self.label,
        })
    }
}

/// Which reproducing-kernel weight `u(z)` enters the integrands.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    /// `u = (1 − |ϑ|²)/(1 − |z|²)`, the diagonal of the `K_ϑ` kernel.
    Model(&'a InnerFunction),
    /// `u = 1/(1 − |z|²)`.
    Hardy,
}

impl Weight<'_> {
    fn u(&self, p: DiskPoint) -> Result<f64> {
        match self {
            Weight::Model(f) => f.kernel_diag(p),
            Weight::Hardy => Ok(1.0 / p.comp),
        }
    }

    fn angles(&self) -> Vec<f64> {
        match self {
            Weight::Model(f) => f.critical_angles(),
            Weight::Hardy => Vec::new(),
        }
    }
}

/// Form of the model-space integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrandForm {
    /// `(N·u)^{p/2}·u²`; at `p = 2` this is the one-component HS integral.
    #[default]
    Kernel,
    /// `(N·(1 − |ϑ|)²/(1 − |z|²))^{p/2}·u²`, the factor as printed in the
    /// statement of the integral criterion.
    Printed,
    /// `(N/d)^{p/2}·d^{−2}` with `d = dist(z, ∂D_δ)` from the traced domain.
    Distance,
}

#[derive(Debug, Clone, Copy)]
pub struct ShellOptions {
    pub shells: usize,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub rule: VerdictRule,
    pub form: IntegrandForm,
}

impl Default for ShellOptions {
    fn default() -> Self {
        ShellOptions {
            shells: 20,
            rel_tol: 1e-6,
            max_panels: 3000,
            rule: VerdictRule::default(),
            form: IntegrandForm::Kernel,
        }
    }
}

impl ShellOptions {
    pub fn with_shells(shells: usize) -> Self {
        ShellOptions {
            shells,
            ..Default::default()
        }
    }
}

/// Gap range `s = 1 − |z|` of shell `k`.
pub fn shell_gaps(k: usize) -> (f64, f64) {
    if k == 0 {
        (0.5, 1.0)
    } else {
        (0.5f64.powi(k as i32 + 1), 0.5f64.powi(k as i32))
    }
}

fn wrap(t: f64) -> f64 {
    (t + PI).rem_euclid(2.0 * PI) - PI
}

/// Angular cuts on `[−π, π]`: a uniform base plus points graded
/// geometrically toward each critical angle down to `scale`.
fn angular_cuts(critical: &[f64], scale: f64) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..=8).map(|j| -PI + 2.0 * PI * j as f64 / 8.0).collect();
    for &c in critical {
        let c = wrap(c);
        cuts.push(c);
        let mut h = scale;
        while h < 0.25 * PI {
            cuts.push(wrap(c - h));
            cuts.push(wrap(c + h));
            h *= 2.0;
        }
    }
    cuts.retain(|t| t.is_finite());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts
}

/// Integrates `g(s, t)` against normalized area over dyadic shells.
/// Evaluation errors mark the shell as not ok.
fn shell_integrate(
    label: &str,
    g: &dyn Fn(f64, f64) -> Result<f64>,
    critical: &[f64],
    radial_cuts: &[f64],
    opts: &ShellOptions,
    mut notes: Vec<String>,
) -> ShellReport {
    let mut rows = Vec::with_capacity(opts.shells);
    let mut evaluation_failed = Vec::with_capacity(opts.shells);
    let mut cumulative = 0.0f64;
    for k in 0..opts.shells {
        let (s_lo, s_hi) = shell_gaps(k);
        let mut s_cuts = vec![s_lo, s_hi];
        s_cuts.extend(radial_cuts.iter().copied().filter(|&s| s > s_lo && s < s_hi));
        s_cuts.sort_by(f64::total_cmp);
        let t_cuts = angular_cuts(critical, 0.5 * s_lo);
        let mut failure: Option<Error> = None;
        let est = integrate_2d(
            |s, t| match g(s, t) {
                Ok(v) if v.is_finite() => v * (1.0 - s) / PI,
                Ok(_) => {
                    failure.get_or_insert_with(|| Error::numeric("shell integrand", "non-finite value"));
                    0.0
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            &s_cuts,
            &t_cuts,
            Adaptive {
                rel_tol: opts.rel_tol,
                abs_tol: 1e-3 * opts.rel_tol * cumulative,
                max_panels: opts.max_panels,
            },
        );
        let ok = est.converged && failure.is_none();
        evaluation_failed.push(failure.is_some());
        if let Some(e) = failure {
            notes.push(format!("shell {k}: {e}"));
        }
        cumulative += est.value;
        rows.push((1.0 - s_hi, 1.0 - s_lo, est.value, est.error, ok));
    }
    // a shell whose quadrature stalled is still fine if its error is
    // negligible against the final total
    let total = cumulative;
    for (r, failed) in rows.iter_mut().zip(&evaluation_failed) {
        if !r.4 && !failed && r.3 <= opts.rel_tol * total {
            r.4 = true;
        }
    }
    ShellReport::from_increments(label, rows, opts.rule, notes)
}

fn symbol_angles(s: &Symbol) -> Vec<f64> {
    match s {
        Symbol::SectorMap { .. } | Symbol::CornerModel { .. } => vec![0.0, PI],
        Symbol::AffineDisk { center, radius } => {
            let mut v = Vec::new();
            if center.norm() > 0.0 {
                v.push(center.arg());
                if (center.norm() + radius - 1.0).abs() < 1e-12 {
                    v.push(center.arg());
                }
            }
            v
        }
        Symbol::FiniteBlaschke { .. } => s.origin_image().map(|w| vec![w.arg()]).unwrap_or_default(),
    }
}

fn symbol_radial_cuts(s: &Symbol) -> Vec<f64> {
    if !s.is_map() {
        return Vec::new();
    }
    let mut v = Vec::new();
    if let Ok(w) = s.origin_image() {
        v.push(1.0 - w.norm());
    }
    if let Symbol::AffineDisk { center, radius } = s {
        v.push(1.0 - (center.norm() + radius));
        v.push(1.0 - (center.norm() - radius).abs());
    }
    v.retain(|x| *x > 0.0 && *x < 1.0);
    v
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("exponent p = {p} must be positive")));
    }
    Ok(())
}

/// `sup_{|z| = r} N_φ(z)·u(z)` for each radius; `u` is the `K_ϑ` kernel
/// diagonal or `1/(1 − r²)` for the Hardy space. The angular sample is
/// uniform with extra points graded toward the critical angles.
pub fn compactness_ratio(weight: Weight<'_>, s: &Symbol, radii: &[f64], samples: usize) -> Result<Vec<(f64, f64)>> {
    let mut crit = weight.angles();
    crit.extend(symbol_angles(s));
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Parameter(format!("radius {r} outside (0, 1)")));
            }
            let gap = 1.0 - r;
            let mut ts: Vec<f64> = (0..samples.max(16))
                .map(|k| -PI + 2.0 * PI * (k as f64 + 0.5) / samples.max(16) as f64)
                .collect();
            for &c in &crit {
                let mut h = 1e-3 * gap;
                while h < 0.5 {
                    for m in [0.5, 0.75, 1.0, 1.5] {
                        ts.push(c + m * h);
                        ts.push(c - m * h);
                    }
                    h *= 2.0;
                }
            }
            let mut best = 0.0f64;
            for t in ts {
                let n = match s.nevanlinna_polar(gap, t) {
                    Ok(n) => n,
                    Err(Error::Pole { .. }) => continue,
                    Err(e) => return Err(e),
                };
                if n > 0.0 {
                    best = best.max(n * weight.u(DiskPoint::from_gap(gap, t))?);
                }
            }
            Ok((r, best))
        })
        .collect()
}

/// `Σ_i (μ(G_i)/d(G_i))^{p/2}` grouped by box depth. Residual squares
/// near the spectrum and the core `|z| ≤ 1/2` are reported in the notes.
pub fn luecking_sum(m: &EmpiricalMeasure, dec: &WhitneyDecomposition, p: f64) -> Result<ShellReport> {
    luecking_sum_with(m, dec, p, VerdictRule::default())
}

pub fn luecking_sum_with(m: &EmpiricalMeasure, dec: &WhitneyDecomposition, p: f64, rule: VerdictRule) -> Result<ShellReport> {
    check_p(p)?;
    let binned = m.binned().ok_or(Error::BinningMismatch)?;
    if binned.fingerprint != dec.fingerprint() {
        return Err(Error::BinningMismatch);
    }
    let depth_of = |b: &crate::geometry::DyadicBox| b.level as usize;
    let levels = dec.max_depth() as usize + 1;
    let mut by_depth = vec![0.0; levels];
    for (&i, &mass) in &binned.boxes {
        let b = dec.boxes().get(i).ok_or(Error::BinningMismatch)?;
        let d = depth_of(&b.region).min(levels - 1);
        by_depth[d] += (mass / b.diameter()).powf(0.5 * p);
    }
    let mut residual_term = 0.0;
    for (&i, &mass) in &binned.residual {
        let r = dec.residual().get(i).ok_or(Error::BinningMismatch)?;
        residual_term += (mass / r.diameter()).powf(0.5 * p);
    }
    let notes = vec![
        format!("residual squares: mass {:e}, term {residual_term:e}", binned.residual.values().sum::<f64>()),
        format!("core mass (|z| ≤ 1/2): {:e}", binned.core),
    ];
    let rows = by_depth
        .iter()
        .enumerate()
        .map(|(d, &v)| (1.0 - 0.5f64.powi(d as i32), 1.0 - 0.5f64.powi(d as i32 + 1), v, 0.0, true))
        .collect();
    Ok(ShellReport::from_increments(
        format!("luecking p={p}"),
        rows,
        rule,
        notes,
    ))
}

/// `∫ (N_φ·u)^{p/2}·u² dA`, `u = (1 − |ϑ|²)/(1 − |z|²)`, shell by shell.
pub fn integral_schatten_modelspace(
    f: &InnerFunction,
    dom: &LevelDomain,
    s: &Symbol,
    p: f64,
    shells: usize,
) -> Result<ShellReport> {
    integral_schatten_modelspace_with(f, dom, s, p, &ShellOptions::with_shells(shells))
}

pub fn integral_schatten_modelspace_with(
    f: &InnerFunction,
    dom: &LevelDomain,
    s: &Symbol,
    p: f64,
    opts: &ShellOptions,
) -> Result<ShellReport> {
    model_integral(f, Some(dom), s, p, opts)
}

/// The model-space integral in a form that needs no traced domain
/// (`Kernel` or `Printed`).
pub fn integral_schatten_kernel_with(f: &InnerFunction, s: &Symbol, p: f64, opts: &ShellOptions) -> Result<ShellReport> {
    if opts.form == IntegrandForm::Distance {
        return Err(Error::Parameter("the distance form needs a traced domain".into()));
    }
    model_integral(f, None, s, p, opts)
}

fn model_integral(
    f: &InnerFunction,
    dom: Option<&LevelDomain>,
    s: &Symbol,
    p: f64,
    opts: &ShellOptions,
) -> Result<ShellReport> {
    check_p(p)?;
    if opts.form == IntegrandForm::Distance && dom.is_none() {
        return Err(Error::Parameter("the distance form needs a traced domain".into()));
    }
    let half = 0.5 * p;
    let form = opts.form;
    let g = move |gap: f64, t: f64| -> Result<f64> {
        let n = s.nevanlinna_polar(gap, t)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        let pt = DiskPoint::from_gap(gap, t);
        match form {
            IntegrandForm::Kernel => {
                let u = f.kernel_diag(pt)?;
                Ok((n * u).powf(half) * u * u)
            }
            IntegrandForm::Printed => {
                let u = f.kernel_diag(pt)?;
                let defect = (u * pt.comp).min(1.0);
                let one_minus_mod = defect / (1.0 + (1.0 - defect).sqrt());
                Ok((n * one_minus_mod * one_minus_mod / pt.comp).powf(half) * u * u)
            }
            IntegrandForm::Distance => {
                let d = dom.map_or(f64::NAN, |dom| dom.distance(pt.z));
                Ok((n / d).powf(half) / (d * d))
            }
        }
    };
    let mut crit = f.critical_angles();
    crit.extend(symbol_angles(s));
    Ok(shell_integrate(
        &format!("model-space integral p={p}"),
        &g,
        &crit,
        &symbol_radial_cuts(s),
        opts,
        vec![format!("form: {form:?}")],
    ))
}

/// `∫ (N_φ/(1 − |z|²))^{p/2} dA/(1 − |z|²)²`, shell by shell.
pub fn integral_schatten_hardy(s: &Symbol, p: f64, shells: usize) -> Result<ShellReport> {
    integral_schatten_hardy_with(s, p, &ShellOptions::with_shells(shells))
}

pub fn integral_schatten_hardy_with(s: &Symbol, p: f64, opts: &ShellOptions) -> Result<ShellReport> {
    check_p(p)?;
    let half = 0.5 * p;
    let g = move |gap: f64, t: f64| -> Result<f64> {
        let n = s.nevanlinna_polar(gap, t)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        let d = gap * (2.0 - gap);
        Ok((n / d).powf(half) / (d * d))
    };
    Ok(shell_integrate(
        &format!("hardy integral p={p}"),
        &g,
        &symbol_angles(s),
        &symbol_radial_cuts(s),
        opts,
        Vec::new(),
    ))
}

/// Hilbert–Schmidt norm squared by the Stanton route:
/// `k(φ(0), φ(0)) + ½∫ Δk(z, z)·N_φ(z) dA`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HsStanton {
    /// `+∞` when the shell report diverges.
    pub value: f64,
    pub constant: f64,
    pub report: ShellReport,
}

pub fn hs_stanton(f: &InnerFunction, s: &Symbol, opts: &ShellOptions) -> Result<HsStanton> {
    if !s.is_map() {
        return Err(Error::NotAMap("Stanton formula needs a map".into()));
    }
    let constant = f.kernel_diag(DiskPoint::new(s.origin_image()?))?;
    let g = |gap: f64, t: f64| -> Result<f64> {
        let n = s.nevanlinna_polar(gap, t)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok(0.5 * f.kernel_laplacian_diag(DiskPoint::from_gap(gap, t))? * n)
    };
    let mut crit = f.critical_angles();
    crit.extend(symbol_angles(s));
    let report = shell_integrate("stanton", &g, &crit, &symbol_radial_cuts(s), opts, Vec::new());
    let value = match report.verdict {
        Verdict::Diverging => f64::INFINITY,
        _ => constant + report.total(),
    };
    Ok(HsStanton { value, constant, report })
}

/// The two one-sided Hilbert–Schmidt tests:
/// upper `∫ (1 − |ϑ|²)(1 − |z|²)^{−3} N dA` (finite ⇒ HS) and
/// lower `∫ u³ N dA` (HS ⇒ finite).
pub fn hs_bounds(f: &InnerFunction, s: &Symbol, opts: &ShellOptions) -> Result<(ShellReport, ShellReport)> {
    let mut crit = f.critical_angles();
    crit.extend(symbol_angles(s));
    let cuts = symbol_radial_cuts(s);
    let upper = |gap: f64, t: f64| -> Result<f64> {
        let n = s.nevanlinna_polar(gap, t)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        let pt = DiskPoint::from_gap(gap, t);
        Ok(f.kernel_diag(pt)? / (pt.comp * pt.comp) * n)
    };
    let lower = |gap: f64, t: f64| -> Result<f64> {
        let n = s.nevanlinna_polar(gap, t)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        let u = f.kernel_diag(DiskPoint::from_gap(gap, t))?;
        Ok(u * u * u * n)
    };
    Ok((
        shell_integrate("hs upper test", &upper, &crit, &cuts, opts, Vec::new()),
        shell_integrate("hs lower test", &lower, &crit, &cuts, opts, Vec::new()),
    ))
}

/// Sufficient test for `S_p`, `p ≥ 2`: `∫ (N/Φ)^{p/2}·Δk·Φ dA` with
/// `Φ = (1 − |z|²)/(1 − |ϑ|²)^b`, and `b = 1` for one-component `ϑ`.
pub fn sufficient_sp(
    f: &InnerFunction,
    s: &Symbol,
    p: f64,
    b: f64,
    one_component: bool,
    opts: &ShellOptions,
) -> Result<ShellReport> {
    if !(p >= 2.0) {
        return Err(Error::Parameter(format!("sufficient test needs p ≥ 2, got {p}")));
    }
    let b = if one_component { 1.0 } else { b };
    if !one_component && !(b > 0.0 && b < 0.5) {
        return Err(Error::Parameter(format!("b = {b} outside (0, 1/2)")));
    }
    let half = 0.5 * p;
    let g = move |gap: f64, t: f64| -> Result<f64> {
        let n = s.nevanlinna_polar(gap, t)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        let pt = DiskPoint::from_gap(gap, t);
        let defect = f.defect(pt)?;
        let phi = pt.comp / defect.powf(b);
        Ok((n / phi).powf(half) * f.kernel_laplacian_diag(pt)? * phi)
    };
    let mut crit = f.critical_angles();
    crit.extend(symbol_angles(s));
    Ok(shell_integrate(
        &format!("sufficient S_p p={p} b={b}"),
        &g,
        &crit,
        &symbol_radial_cuts(s),
        opts,
        Vec::new(),
    ))
}

/// Normalized `H²` test kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BerezinKernel {
    /// `G_z(w) = (1 − |z|²)^{1/2}/(1 − z̄w)`.
    G,
    /// `H_z(w) = (1 − |z|²)^{3/2} w/(1 − z̄w)²`.
    H,
}

/// Weighted composition `C h = (ψ′∘φ)^{1/2}·h∘ψ∘φ` with `ψ` the affine
/// Riemann map of a disk-shaped `D_δ` onto the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComposition {
    pub symbol: Symbol,
    pub center: Complex64,
    pub radius: f64,
}

impl WeightedComposition {
    /// Requires the traced boundary to be a circle within the trace
    /// tolerance.
    pub fn from_domain(dom: &LevelDomain, s: &Symbol) -> Result<Self> {
        if !s.is_map() {
            return Err(Error::NotAMap("Berezin test needs a map".into()));
        }
        let (center, radius, dev) = dom
            .circle_fit()
            .ok_or_else(|| Error::UnsupportedDomain("circle fit failed".into()))?;
        let allowed = 10.0 * (dom.chord_error() + dom.max_residual()) + 1e-9 * radius;
        if dev > allowed {
            return Err(Error::UnsupportedDomain(format!(
                "D_δ is not a disk: circle deviation {dev:e} > {allowed:e}"
            )));
        }
        Ok(WeightedComposition {
            symbol: s.clone(),
            center,
            radius,
        })
    }

    /// `ψ(w) = (w − center)/radius`.
    pub fn psi(&self, w: Complex64) -> Complex64 {
        (w - self.center) / self.radius
    }

    /// `‖C K_z‖²` by the trapezoid rule on the circle with node doubling.
    pub fn norm_sq(&self, z: Complex64, which: BerezinKernel, rel_tol: f64) -> Result<f64> {
        let comp = 1.0 - z.norm_sqr();
        let dpsi = 1.0 / self.radius;
        let mut failure = None;
        let (avg, _) = circle_average(
            |t, out| {
                let w = match self.symbol.boundary_value(t) {
                    Ok(w) => self.psi(w),
                    Err(e) => {
                        failure.get_or_insert(e);
                        out[0] = 0.0;
                        return;
                    }
                };
                let den = 1.0 - z.conj() * w;
                let k = match which {
                    BerezinKernel::G => comp.sqrt() / den,
                    BerezinKernel::H => comp.powf(1.5) * w / (den * den),
                };
                out[0] = dpsi * k.norm_sqr();
            },
            1,
            rel_tol,
            64,
            1 << 20,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(avg[0])
    }
}

/// `∫ ‖C K_z‖^p dA/(1 − |z|²)²` over shells, for disk-shaped `D_δ`.
pub fn berezin_test(
    dom: &LevelDomain,
    s: &Symbol,
    p: f64,
    which: BerezinKernel,
    opts: &ShellOptions,
) -> Result<ShellReport> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("Berezin test needs p ≥ 1, got {p}")));
    }
    let op = WeightedComposition::from_domain(dom, s)?;
    let half = 0.5 * p;
    let g = |gap: f64, t: f64| -> Result<f64> {
        let z = Complex64::from_polar(1.0 - gap, t);
        let d = gap * (2.0 - gap);
        Ok(op.norm_sq(z, which, 1e-10)?.powf(half) / (d * d))
    };
    Ok(shell_integrate(
        &format!("berezin {which:?} p={p}"),
        &g,
        &symbol_angles(s),
        &[],
        opts,
        vec![format!("D_δ disk: center {}, radius {}", op.center, op.radius)],
    ))
}

/// `(1/2π)∫ k(w, w) dμ_φ(w)` for the model-space kernel, from atoms.
pub fn kernel_against_measure(f: &InnerFunction, m: &EmpiricalMeasure) -> Result<f64> {
    match m {
        EmpiricalMeasure::Atoms(atoms) => {
            let mut acc = 0.0;
            for (w, mass) in atoms {
                acc += mass * f.kernel_diag(DiskPoint::new(*w))?;
            }
            Ok(acc / (2.0 * PI))
        }
        EmpiricalMeasure::Binned(_) => Err(Error::Parameter("kernel integral needs an atomic measure".into())),
    }
}

/// Box measure `G ↦ mean of N_φ over G` on `dec`, sampled on a
/// `samples × samples` polar grid in gap form. Stands in for `μ_φ` when
/// only the counting function is available (the corner model): for a
/// top half `G` over an arc `I`, `N_φ ≍ (1 − |z|)·μ_φ(S(I))/|I|` on `G`.
pub fn counting_box_measure(s: &Symbol, dec: &WhitneyDecomposition, samples: usize) -> Result<EmpiricalMeasure> {
    let n = samples.max(1);
    let mut boxes = BTreeMap::new();
    for (i, b) in dec.boxes().iter().enumerate() {
        let (g_hi, g_lo) = (1.0 - b.region.r_lo(), 1.0 - b.region.r_hi());
        let (t0, w) = (b.region.angle_lo(), b.region.arc_length());
        let mut acc = 0.0;
        for j in 0..n {
            let gap = g_lo + (g_hi - g_lo) * (j as f64 + 0.5) / n as f64;
            for k in 0..n {
                acc += s.nevanlinna_polar(gap, t0 + w * (k as f64 + 0.5) / n as f64)?;
            }
        }
        let mean = acc / (n * n) as f64;
        if mean > 0.0 {
            boxes.insert(i, mean);
        }
    }
    Ok(EmpiricalMeasure::Binned(BinnedMass {
        fingerprint: dec.fingerprint(),
        boxes,
        residual: BTreeMap::new(),
        core: 0.0,
        clamped: 0,
    }))
}

/// Per-depth summary of a binned measure for diagnostics.
pub fn mass_by_depth(m: &EmpiricalMeasure, dec: &WhitneyDecomposition) -> Result<BTreeMap<u32, f64>> {
    let binned = m.binned().ok_or(Error::BinningMismatch)?;
    if binned.fingerprint != dec.fingerprint() {
        return Err(Error::BinningMismatch);
    }
    let mut out = BTreeMap::new();
    for (&i, &mass) in &binned.boxes {
        *out.entry(dec.boxes()[i].region.level).or_insert(0.0) += mass;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_whitney, WhitneyParams};
    use crate::level::level_boundary;
    use crate::symbols::{pullback_atoms, pullback_measure};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn verdict_rule_cases() {
        let rule = VerdictRule::default();
        let geometric: Vec<f64> = (0..12).map(|k| 0.5f64.powi(k)).collect();
        assert_eq!(rule.apply(&geometric).0, Verdict::Converging);
        let growing: Vec<f64> = (0..12).map(|k| 1.1f64.powi(k)).collect();
        assert_eq!(rule.apply(&growing).0, Verdict::Diverging);
        let flat = vec![1.0; 12];
        assert_eq!(rule.apply(&flat).0, Verdict::Diverging);
        let harmonic: Vec<f64> = (1..40).map(|k| 1.0 / (k * k) as f64).collect();
        assert_eq!(rule.apply(&harmonic).0, Verdict::Inconclusive);
        let mut support = vec![1.0, 0.3];
        support.extend(vec![0.0; 10]);
        assert_eq!(rule.apply(&support).0, Verdict::Converging);
        assert_eq!(rule.apply(&[1.0, 0.5]).0, Verdict::Inconclusive);
        // period-two oscillation on a geometric trend
        let zigzag: Vec<f64> = (0..16).map(|k| 0.8f64.powi(k) * if k % 2 == 0 { 1.0 } else { 0.2 }).collect();
        assert_eq!(rule.apply(&zigzag).0, Verdict::Inconclusive);
        let paired = VerdictRule { stride: 2, ..rule };
        assert_eq!(paired.apply(&zigzag).0, Verdict::Converging);
    }

    #[test]
    fn compactness_examples() {
        let z = InnerFunction::power(1).unwrap();
        let cz = Symbol::scaled(0.5).unwrap();
        for (_, v) in compactness_ratio(Weight::Model(&z), &cz, &[0.6, 0.9], 256).unwrap() {
            assert_eq!(v, 0.0);
        }
        let id = Symbol::identity();
        for (r, v) in compactness_ratio(Weight::Model(&z), &id, &[0.5, 0.9, 0.99], 256).unwrap() {
            assert!((v + r.ln()).abs() < 1e-12, "{r}: {v}");
        }
        let pw = InnerFunction::paley_wiener();
        let half = Symbol::affine(c(0.5, 0.0), 0.5).unwrap();
        let vals = compactness_ratio(Weight::Model(&pw), &half, &[0.9, 0.99, 0.999], 512).unwrap();
        assert!(vals[2].1 > 0.9 && vals[2].1 < 1.1, "{vals:?}");
    }

    #[test]
    fn luecking_four_boxes() {
        let f = InnerFunction::power(1).unwrap();
        let dom = level_boundary(&f, 2.0, 1e-3).unwrap();
        let dec = build_whitney(&dom, WhitneyParams::default()).unwrap();
        let mu = pullback_measure(&Symbol::identity(), 1023, &dec).unwrap();
        let rep = luecking_sum(&mu, &dec, 2.0).unwrap();
        let d = dec.boxes()[0].diameter();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!((rep.total() - 4.0 * (PI / 2.0) / d).abs() < 1e-12);
        let empty = EmpiricalMeasure::empty_on(&dec);
        assert_eq!(luecking_sum(&empty, &dec, 2.0).unwrap().total(), 0.0);
        let other = WhitneyDecomposition::dyadic_grid(3);
        assert!(matches!(luecking_sum(&mu, &other, 2.0), Err(Error::BinningMismatch)));
        let point = EmpiricalMeasure::Atoms(vec![(c(0.0, 0.9), 2.0 * PI)]).bin(&dec).unwrap();
        let rep = luecking_sum(&point, &dec, 2.0).unwrap();
        assert!((rep.total() - 2.0 * PI / d).abs() < 1e-12);
    }

    #[test]
    fn model_space_integral_against_direct_quadrature() {
        let f = InnerFunction::power(2).unwrap();
        let dom = level_boundary(&f, 2.0, 1e-3).unwrap();
        let s = Symbol::scaled(0.5).unwrap();
        let rep = integral_schatten_modelspace(&f, &dom, &s, 2.0, 8).unwrap();
        assert_eq!(rep.verdict, Verdict::Converging);
        // u = 1 + r², N = log(0.5/r) on r < 1/2: (1/π)∫ u³ N 2πr dr
        let est = crate::quadrature::integrate(
            |r| {
                let u: f64 = 1.0 + r * r;
                2.0 * r * u.powi(3) * (0.5 / r).ln()
            },
            0.0,
            0.5,
            &[1e-8, 1e-4, 1e-2],
            Adaptive::with_tol(1e-13, 0.0),
        );
        assert!((rep.total() - est.value).abs() < 1e-4 * est.value, "{} vs {}", rep.total(), est.value);
    }

    #[test]
    fn hardy_integral_examples() {
        let s = Symbol::scaled(0.5).unwrap();
        let rep = integral_schatten_hardy(&s, 2.0, 10).unwrap();
        assert_eq!(rep.verdict, Verdict::Converging);
        let rep = integral_schatten_hardy(&Symbol::identity(), 2.0, 10).unwrap();
        assert_eq!(rep.verdict, Verdict::Diverging);
    }

    #[test]
    fn stanton_examples() {
        let opts = ShellOptions::with_shells(12);
        let z = InnerFunction::power(1).unwrap();
        let v = hs_stanton(&z, &Symbol::scaled(0.7).unwrap(), &opts).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        let z2 = InnerFunction::power(2).unwrap();
        let v = hs_stanton(&z2, &Symbol::scaled(0.5).unwrap(), &opts).unwrap();
        assert!((v.value - 1.25).abs() < 1e-6, "{}", v.value);
        let z3 = InnerFunction::power(3).unwrap();
        let v = hs_stanton(&z3, &Symbol::identity(), &ShellOptions::with_shells(40)).unwrap();
        assert!((v.value - 3.0).abs() < 1e-6, "{}", v.value);
    }

    #[test]
    fn stanton_with_shifted_origin_image() {
        // φ(0) ≠ 0: the constant term is k(φ(0), φ(0))
        let f = InnerFunction::blaschke(&[c(0.3, 0.2), c(-0.4, 0.1)]).unwrap();
        let s = Symbol::affine(c(0.25, 0.0), 0.25).unwrap();
        let st = hs_stanton(&f, &s, &ShellOptions::with_shells(12)).unwrap();
        let atoms = pullback_atoms(&s, 1 << 12).unwrap();
        let pull = kernel_against_measure(&f, &atoms).unwrap();
        assert!((st.value - pull).abs() < 1e-6 * pull, "{} vs {pull}", st.value);
    }

    #[test]
    fn hs_bounds_ordering() {
        let z2 = InnerFunction::power(2).unwrap();
        let (up, low) = hs_bounds(&z2, &Symbol::scaled(0.5).unwrap(), &ShellOptions::with_shells(8)).unwrap();
        assert_eq!(up.verdict, Verdict::Converging);
        assert_eq!(low.verdict, Verdict::Converging);
        assert!(up.total() >= low.total() && low.total() > 0.0);
    }

    #[test]
    fn sufficient_examples() {
        let z2 = InnerFunction::power(2).unwrap();
        let s = Symbol::scaled(0.5).unwrap();
        let opts = ShellOptions::with_shells(8);
        for p in [2.0, 4.0] {
            let rep = sufficient_sp(&z2, &s, p, 0.4, false, &opts).unwrap();
            assert_eq!(rep.verdict, Verdict::Converging);
            assert!(rep.total().is_finite() && rep.total() > 0.0);
        }
        assert!(sufficient_sp(&z2, &s, 1.0, 0.4, false, &opts).is_err());
    }

    #[test]
    fn berezin_examples() {
        let pw = InnerFunction::paley_wiener();
        let dom = level_boundary(&pw, 0.5f64.exp(), 1e-3).unwrap();
        let s = Symbol::affine(c(0.25, 0.0), 0.25).unwrap();
        let op = WeightedComposition::from_domain(&dom, &s).unwrap();
        assert!((op.center - c(-1.0, 0.0)).norm() < 1e-5 && (op.radius - 2.0).abs() < 1e-5);
        // ψ′ = 1/2 and G_0 ≡ 1
        let g0 = op.norm_sq(c(0.0, 0.0), BerezinKernel::G, 1e-12).unwrap();
        assert!((g0 - 0.5).abs() < 1e-5, "{g0}");
        // rotation invariance for φ = 0 needs ψ(0) = 0, i.e. D_δ centred at 0
        let z2 = InnerFunction::power(2).unwrap();
        let centred = level_boundary(&z2, 2.0, 1e-3).unwrap();
        let zero = WeightedComposition::from_domain(&centred, &Symbol::scaled(0.0).unwrap()).unwrap();
        let a = zero.norm_sq(Complex64::from_polar(0.6, 0.3), BerezinKernel::G, 1e-12).unwrap();
        let b = zero.norm_sq(Complex64::from_polar(0.6, 2.5), BerezinKernel::G, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let rep = berezin_test(&dom, &s, 2.0, BerezinKernel::H, &ShellOptions::with_shells(8)).unwrap();
        assert_eq!(rep.verdict, Verdict::Converging);
        assert!(berezin_test(&dom, &s, 0.5, BerezinKernel::H, &ShellOptions::with_shells(8)).is_err());
    }

    #[test]
    fn report_exports() {
        let rep = integral_schatten_hardy(&Symbol::scaled(0.5).unwrap(), 2.0, 8).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("shell_index,inner_radius,outer_radius,increment,cumulative,verdict_flag\n"));
        assert_eq!(text.lines().count(), 9);
        let j = rep.summary_json("demo", serde_json::json!({"p": 2}));
        assert_eq!(j["verdict"], "converging");
        let cum: Vec<f64> = rep.shells.iter().map(|s| s.cumulative).collect();
        assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    }
}
