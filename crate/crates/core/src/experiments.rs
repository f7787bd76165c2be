//! Config-driven experiment runners behind the command line.
//!
//! A config is a flat `key = value` text file with dotted keys; `#` starts
//! a comment. Each experiment accepts a fixed set of keys and rejects any
//! other before computing. Outputs go to `<out>/<experiment>/`; numbers
//! are written with 17 significant digits and JSON keys are sorted, so
//! reruns of one config produce byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::criteria::{
    compactness_ratio, counting_box_measure, hs_bounds, hs_stanton, integral_schatten_hardy_with,
    integral_schatten_kernel_with, luecking_sum_with, ShellOptions, ShellReport, Verdict, VerdictRule,
    Weight,
};
use crate::error::{Error, Result};
use crate::geometry::{build_whitney, build_whitney_surrogate, validate_whitney, WhitneyDecomposition, WhitneyParams};
use crate::inner::{BlaschkeZero, InnerFunction};
use crate::level::level_boundary;
use crate::rng::Lcg;
use crate::spectral::{compop_gram, hs_pullback, hs_pullback_graded, normalized_kernel_image, schatten_norm};
use crate::symbols::{pullback_measure_adaptive, EmpiricalMeasure, Symbol};

/// Experiment name plus its parameter map.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.to_string(),
            entries: BTreeMap::new(),
        }
    }

    /// Parses config text for `experiment`. An `experiment` key, if
    /// present, must name the same experiment.
    pub fn parse(experiment: &str, text: &str) -> Result<Self> {
        let mut cfg = Self::new(experiment);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "experiment" {
                if v != experiment {
                    return Err(Error::Config(format!("config is for `{v}`, not `{experiment}`")));
                }
                continue;
            }
            if cfg.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", lineno + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(experiment: &str, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(experiment, &text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.entries.keys() {
            let ok = allowed.iter().any(|a| a == k || (a.ends_with(".*") && k.starts_with(&a[..a.len() - 1])));
            if !ok {
                return Err(Error::Config(format!("unknown key `{k}` for {}", self.experiment)));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), |v| parse_real(key, v))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| Error::Config(format!("{key}: `{v}` is not a count")))
        })
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|x| parse_real(key, x.trim())).collect(),
        }
    }

    /// A list of exponents, each required to be positive.
    pub fn p_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = self.list_or(key, default)?;
        if v.is_empty() || v.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Config(format!("{key} needs positive exponents, got {v:?}")));
        }
        Ok(v)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    fn params_json(&self) -> Value {
        Value::Object(self.entries.iter().map(|(k, v)| (k.clone(), json!(v))).collect())
    }
}

/// A real number, or `exp(x)`, or a fraction `a/b`.
fn parse_real(key: &str, v: &str) -> Result<f64> {
    let bad = || Error::Config(format!("{key}: `{v}` is not a number"));
    if let Some(inner) = v.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')) {
        return Ok(parse_real(key, inner.trim())?.exp());
    }
    if let Some((a, b)) = v.split_once('/') {
        return Ok(parse_real(key, a.trim())? / parse_real(key, b.trim())?);
    }
    v.parse().map_err(|_| bad())
}

/// `re,im; re,im; ...`
fn parse_points(key: &str, v: &str) -> Result<Vec<Complex64>> {
    v.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (re, im) = p
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("{key}: point `{p}` needs re,im")))?;
            Ok(Complex64::new(parse_real(key, re.trim())?, parse_real(key, im.trim())?))
        })
        .collect()
}

/// Zeros drawn uniformly from `|z| ≤ radius`.
pub fn random_zeros(rng: &mut Lcg, count: usize, radius: f64) -> Vec<Complex64> {
    (0..count).map(|_| rng.in_disk(radius)).collect()
}

const THETA_KEYS: &[&str] = &["theta.kind", "theta.n", "theta.zeros", "theta.count", "theta.json", "theta.degree"];
const PHI_KEYS: &[&str] = &[
    "phi.kind",
    "phi.c",
    "phi.center",
    "phi.radius",
    "phi.zeros",
    "phi.alpha",
    "phi.json",
    "phi.degree",
];

/// `theta.kind`: `power` (`theta.n`), `blaschke` (`theta.zeros`),
/// `paley_wiener`, `tangent_cluster` (`theta.count`), `random`
/// (`theta.degree`, drawn from `run.seed`), or `json` (`theta.json`).
pub fn theta_from(cfg: &ExperimentConfig, default: &str) -> Result<InnerFunction> {
    match cfg.str_or("theta.kind", default) {
        "power" => InnerFunction::power(cfg.usize_or("theta.n", 1)?),
        "blaschke" => InnerFunction::blaschke(&parse_points("theta.zeros", cfg.str_or("theta.zeros", ""))?),
        "paley_wiener" => Ok(InnerFunction::paley_wiener()),
        "tangent_cluster" => InnerFunction::tangent_cluster(cfg.usize_or("theta.count", 30)?),
        "random" => {
            let mut rng = Lcg::new(cfg.usize_or("run.seed", 0)? as u64);
            InnerFunction::blaschke(&random_zeros(&mut rng, cfg.usize_or("theta.degree", 3)?, 0.9))
        }
        "json" => InnerFunction::from_json(cfg.str_or("theta.json", "")),
        other => Err(Error::Config(format!("unknown theta.kind `{other}`"))),
    }
}

/// `phi.kind`: `identity`, `scaled` (`phi.c`), `affine` (`phi.center`,
/// `phi.radius`), `blaschke` (`phi.zeros`), `sector` / `corner`
/// (`phi.alpha`), `random` (`phi.degree`, seed `run.seed + 1`), or `json`.
pub fn phi_from(cfg: &ExperimentConfig, default: &str) -> Result<Symbol> {
    match cfg.str_or("phi.kind", default) {
        "identity" => Ok(Symbol::identity()),
        "scaled" => Symbol::scaled(cfg.f64_or("phi.c", 0.5)?),
        "affine" => {
            let center = parse_points("phi.center", cfg.str_or("phi.center", "0.5,0"))?;
            let center = *center.first().ok_or_else(|| Error::Config("phi.center is empty".into()))?;
            Symbol::affine(center, cfg.f64_or("phi.radius", 0.5)?)
        }
        "blaschke" => Symbol::blaschke(&parse_points("phi.zeros", cfg.str_or("phi.zeros", "0,0"))?),
        "sector" => Symbol::sector(cfg.f64_or("phi.alpha", 0.5)?),
        "corner" => Symbol::corner(cfg.f64_or("phi.alpha", 0.5)?),
        "random" => {
            let mut rng = Lcg::new(cfg.usize_or("run.seed", 0)? as u64 + 1);
            Symbol::blaschke(&random_zeros(&mut rng, cfg.usize_or("phi.degree", 2)?, 0.9))
        }
        "json" => Symbol::from_json(cfg.str_or("phi.json", "")),
        other => Err(Error::Config(format!("unknown phi.kind `{other}`"))),
    }
}

/// Where a finished experiment put its files, and whether every run
/// completed (verdicts may still be diverging).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub completed: bool,
    pub summary: Value,
}

fn out_dir(out: &Path, name: &str) -> Result<PathBuf> {
    let dir = out.join(name);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(num(x))
    }
}

fn shell_options(cfg: &ExperimentConfig, shells: usize) -> Result<ShellOptions> {
    let mut o = ShellOptions::with_shells(cfg.usize_or("run.shells", shells)?);
    o.rel_tol = cfg.f64_or("run.tol", o.rel_tol)?;
    o.rule.stride = cfg.usize_or("run.stride", 1)?.max(1);
    Ok(o)
}

/// Schatten threshold `p* = 2α/(1 − α)` of the sector map on the
/// Paley–Wiener model space.
pub fn corner_threshold(alpha: f64) -> f64 {
    2.0 * alpha / (1.0 - alpha)
}

/// Corner examples: Hardy integral on the corner model and model-space
/// integral for Paley–Wiener `ϑ` with the sector map, per `p`, plus
/// compactness ratios.
///
/// Keys: `run.alpha`, `run.p_list`, `run.shells`, `run.tol`, `run.radii`.
pub fn cmd_pw_corner(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    cfg.check_keys(&["run.alpha", "run.p_list", "run.shells", "run.tol", "run.radii", "run.stride", "run.seed"])?;
    let alpha = cfg.f64_or("run.alpha", 0.5)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("run.alpha = {alpha} outside (0, 1)")));
    }
    let p_list = cfg.p_list_or("run.p_list", &[1.0, 3.0])?;
    let radii = cfg.list_or("run.radii", &[0.9, 0.99, 0.999])?;
    let opts = shell_options(cfg, 20)?;
    let dir = out_dir(out, "pw-corner")?;
    let p_star = corner_threshold(alpha);
    let pw = InnerFunction::paley_wiener();
    let corner = Symbol::corner(alpha)?;
    let sector = Symbol::sector(alpha)?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut completed = true;
    for &p in &p_list {
        let jobs: [(&str, Result<ShellReport>); 2] = [
            ("hardy_corner", integral_schatten_hardy_with(&corner, p, &opts)),
            ("modelspace_sector", integral_schatten_kernel_with(&pw, &sector, p, &opts)),
        ];
        for (test, res) in jobs {
            let name = format!("{test}_p{p}");
            match res {
                Ok(r) => {
                    r.save_csv(&dir.join(format!("{name}.csv")))?;
                    rows.push(vec![
                        test.into(),
                        num(alpha),
                        num(p),
                        num(p_star),
                        r.verdict.label().into(),
                        num(r.statistic),
                        num(r.value_or_inf()),
                        String::new(),
                    ]);
                    runs.push(r.summary_json("pw-corner", json!({ "test": test, "alpha": alpha, "p": p })));
                }
                Err(e) => {
                    completed = false;
                    log::warn!("{name}: {e}");
                    rows.push(vec![test.into(), num(alpha), num(p), num(p_star), "error".into(), num(f64::NAN), num(f64::NAN), e.to_string()]);
                }
            }
        }
    }
    write_rows(
        &dir.join("verdicts.csv"),
        &["test", "alpha", "p", "p_star", "verdict", "statistic", "value_or_inf", "error"],
        &rows,
    )?;

    let sector_ratio = compactness_ratio(Weight::Model(&pw), &sector, &radii, 2048)?;
    let corner_ratio = compactness_ratio(Weight::Hardy, &corner, &radii, 2048)?;
    let comp_rows: Vec<Vec<String>> = sector_ratio
        .iter()
        .zip(&corner_ratio)
        .map(|(a, b)| vec![num(a.0), num(a.1), num(b.1)])
        .collect();
    write_rows(&dir.join("compactness.csv"), &["r", "sector_modelspace", "corner_hardy"], &comp_rows)?;
    let decreasing = |v: &[(f64, f64)]| v.windows(2).all(|w| w[1].1 < w[0].1);

    let summary = json!({
        "experiment": "pw-corner",
        "params": cfg.params_json(),
        "alpha": alpha,
        "p_star": p_star,
        "runs": runs,
        "compactness_decreasing": {
            "sector_modelspace": decreasing(&sector_ratio),
            "corner_hardy": decreasing(&corner_ratio),
        },
        "completed": completed,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome { dir, completed, summary })
}

/// One term of the counterexample series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTerm {
    pub n: usize,
    pub zero: BlaschkeZero,
    /// `(1 − |z_n|)·‖C_φ k_{z_n}‖²`.
    pub t: f64,
    /// `(1 − |z_n|)/(1 − Re z_n)`, exact for `φ = (1 + z)/2`.
    pub closed_form: f64,
}

/// `t_n` for `n = 1..=n_max` with `φ = (1 + z)/2`; terms whose quadrature
/// fails are dropped with a warning.
pub fn counterexample_terms(n_max: usize) -> Result<Vec<SeriesTerm>> {
    let f = InnerFunction::tangent_cluster(n_max)?;
    let half = Symbol::affine(Complex64::new(0.5, 0.0), 0.5)?;
    let mut out = Vec::new();
    for (i, a) in f.zeros().iter().enumerate() {
        match normalized_kernel_image(a, &half) {
            Ok(t) => {
                let h = (0.5 * a.angle()).sin();
                let closed_form = a.gap() / (2.0 * h * h + a.gap() * a.angle().cos());
                out.push(SeriesTerm { n: i + 1, zero: *a, t, closed_form });
            }
            Err(e) => log::warn!("term {}: {e}", i + 1),
        }
    }
    Ok(out)
}

/// Lower envelope `c₀ = min n·t_n` and least-squares slope of `log t_n`
/// against `log n`, over terms with `n ≥ n_min`.
pub fn series_fit(terms: &[SeriesTerm], n_min: usize) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = terms
        .iter()
        .filter(|t| t.n >= n_min)
        .map(|t| ((t.n as f64).ln(), t.t.ln()))
        .collect();
    let c0 = terms.iter().filter(|t| t.n >= n_min).map(|t| t.n as f64 * t.t).fold(f64::INFINITY, f64::min);
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx) * (p.0 - mx)));
    (c0, sxy / sxx)
}

/// Shell report of the lower Hilbert–Schmidt test `∫ u³ N dA` for the
/// clustered zeros and `φ = (1 + z)/2`. Consecutive zeros are a factor
/// about 4 apart in `1 − |z|`, two shells, so increments are compared
/// two shells apart.
pub fn counterexample_lower_test(count: usize, opts: &ShellOptions) -> Result<ShellReport> {
    let f = InnerFunction::tangent_cluster(count)?;
    let half = Symbol::affine(Complex64::new(0.5, 0.0), 0.5)?;
    let mut o = *opts;
    o.rule.stride = 2;
    Ok(hs_bounds(&f, &half, &o)?.1)
}

/// Counterexample: series terms `t_n ≳ 1/n` (the Hilbert–Schmidt norm
/// diverges) against the converging lower integral test.
///
/// Keys: `run.n_max` (3..=10), `run.shells`, `run.count` (zeros kept in
/// the integral test), `run.tol`.
pub fn cmd_counterexample53(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    cfg.check_keys(&["run.n_max", "run.shells", "run.count", "run.tol", "run.seed"])?;
    let n_max = cfg.usize_or("run.n_max", 8)?;
    if !(3..=10).contains(&n_max) {
        return Err(Error::Config(format!("run.n_max = {n_max} outside 3..=10")));
    }
    let count = cfg.usize_or("run.count", 30)?;
    let opts = shell_options(cfg, 24)?;
    let dir = out_dir(out, "counterexample53")?;
    let half = Symbol::affine(Complex64::new(0.5, 0.0), 0.5)?;
    let mut completed = true;

    let terms = counterexample_terms(n_max)?;
    if terms.len() < n_max {
        completed = false;
    }
    // partial Hilbert–Schmidt norms with the first N zeros
    let all = InnerFunction::tangent_cluster(n_max)?;
    let mut rows = Vec::new();
    let mut partial_sums = Vec::new();
    for t in &terms {
        let f = InnerFunction::new(all.zeros()[..t.n].to_vec(), Vec::new())?;
        let breaks: Vec<f64> = f.zeros().iter().map(|a| 2.0 * a.angle()).collect();
        let scale = 0.25 * f.zeros().iter().map(|a| a.gap()).fold(f64::INFINITY, f64::min);
        let partial = hs_pullback_graded(&f, &half, &breaks, scale).unwrap_or_else(|e| {
            log::warn!("partial HS with {} zeros: {e}", t.n);
            completed = false;
            f64::NAN
        });
        partial_sums.push(partial);
        rows.push(vec![
            t.n.to_string(),
            num(t.zero.angle()),
            num(t.zero.gap()),
            num(t.t),
            num(t.n as f64 * t.t),
            num(t.closed_form),
            num((t.t - t.closed_form).abs() / t.closed_form),
            num(partial),
        ]);
    }
    write_rows(
        &dir.join("series_terms.csv"),
        &["n", "alpha_n", "one_minus_r_n", "t_n", "n_t_n", "closed_form", "rel_err", "partial_hs"],
        &rows,
    )?;
    let (c0, slope) = series_fit(&terms, 3);
    let nonincreasing = terms.windows(2).filter(|w| w[0].n >= 3).all(|w| w[1].t <= w[0].t);

    let report = counterexample_lower_test(count, &opts)?;
    report.save_csv(&dir.join("lower_test.csv"))?;

    let summary = json!({
        "experiment": "counterexample53",
        "params": cfg.params_json(),
        "c0": jnum(c0),
        "log_slope": jnum(slope),
        "terms_bounded_below": c0 > 0.0 && slope >= -1.0,
        "terms_nonincreasing": nonincreasing,
        "lower_test": report.summary_json("counterexample53", json!({ "count": count, "stride": 2 })),
        "lower_test_converging": report.verdict == Verdict::Converging,
        "partial_hs": partial_sums.iter().map(|&x| jnum(x)).collect::<Vec<_>>(),
        "completed": completed,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome { dir, completed, summary })
}

/// One Hilbert–Schmidt route.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub name: &'static str,
    /// `None` when the route does not apply.
    pub value: Option<f64>,
    pub detail: String,
}

/// Spectral, pullback and Stanton values of `‖C_φ‖²_{HS}` on `K_ϑ`.
pub fn hs_routes(f: &InnerFunction, s: &Symbol, opts: &ShellOptions) -> Result<(Vec<Route>, ShellReport)> {
    let spectral = if f.is_finite_blaschke() {
        let sv = compop_gram(f, s, 64)?;
        Route {
            name: "spectral",
            value: Some(schatten_norm(&sv, 2.0)?.powi(2)),
            detail: format!("{} singular values", sv.values.len()),
        }
    } else {
        Route {
            name: "spectral",
            value: None,
            detail: "no finite basis".into(),
        }
    };
    let pullback = match hs_pullback(f, s, 64) {
        Ok(v) => Route { name: "pullback", value: Some(v), detail: String::new() },
        Err(e) => Route { name: "pullback", value: None, detail: e.to_string() },
    };
    let st = hs_stanton(f, s, opts)?;
    let stanton = Route {
        name: "stanton",
        value: Some(st.value),
        detail: format!("{} (constant {})", st.report.verdict.label(), st.constant),
    };
    Ok((vec![spectral, pullback, stanton], st.report))
}

/// Three-route Hilbert–Schmidt comparison plus the one-sided tests.
/// Agreement uses the relative tolerance `100·run.tol`.
///
/// Keys: `theta.*`, `phi.*`, `run.shells`, `run.tol`, `run.seed`.
pub fn cmd_hs_crosscheck(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut keys = THETA_KEYS.to_vec();
    keys.extend(PHI_KEYS);
    keys.extend(["run.shells", "run.tol", "run.stride", "run.seed"]);
    cfg.check_keys(&keys)?;
    let f = theta_from(cfg, "power")?;
    let s = phi_from(cfg, "scaled")?;
    let opts = shell_options(cfg, 40)?;
    let agree_tol = 100.0 * opts.rel_tol;
    let dir = out_dir(out, "hs-crosscheck")?;

    if f.is_finite_blaschke() {
        compop_gram(&f, &s, 64)?.save_csv(&dir.join("spectrum.csv"))?;
    }
    let (routes, stanton) = hs_routes(&f, &s, &opts)?;
    stanton.save_csv(&dir.join("stanton_shells.csv"))?;
    let (upper, lower) = hs_bounds(&f, &s, &opts)?;
    upper.save_csv(&dir.join("bounds_upper.csv"))?;
    lower.save_csv(&dir.join("bounds_lower.csv"))?;

    let mut rows = Vec::new();
    let mut all_agree = true;
    for i in 0..routes.len() {
        for j in i + 1..routes.len() {
            let (a, b) = (&routes[i], &routes[j]);
            let (rel, flag) = match (a.value, b.value) {
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => {
                    let rel = (x - y).abs() / x.abs().max(y.abs());
                    let ok = rel <= agree_tol;
                    all_agree &= ok;
                    (num(rel), ok.to_string())
                }
                _ => (String::new(), "skipped".into()),
            };
            rows.push(vec![
                a.name.into(),
                b.name.into(),
                a.value.map_or(String::new(), num),
                b.value.map_or(String::new(), num),
                rel,
                flag,
            ]);
        }
    }
    write_rows(&dir.join("agreement.csv"), &["route_a", "route_b", "value_a", "value_b", "rel_err", "agree"], &rows)?;
    let summary = json!({
        "experiment": "hs-crosscheck",
        "params": cfg.params_json(),
        "routes": routes.iter().map(|r| json!({
            "route": r.name,
            "value": r.value.map(jnum),
            "detail": r.detail,
        })).collect::<Vec<_>>(),
        "agreement_tol": agree_tol,
        "all_agree": all_agree,
        "upper_test": upper.summary_json("hs-crosscheck", json!({ "test": "upper" })),
        "lower_test": lower.summary_json("hs-crosscheck", json!({ "test": "lower" })),
        "bounds_ordered": lower.total() <= upper.total() * (1.0 + 1e-9),
        "completed": true,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome { dir, completed: true, summary })
}

/// Finiteness class of a report: a verdict, or for a Luecking sum without
/// residual squares the exact finiteness of a finite sum.
fn finiteness(r: &ShellReport, exact_finite: bool) -> Option<bool> {
    match r.verdict {
        Verdict::Converging => Some(true),
        Verdict::Diverging => Some(false),
        Verdict::Inconclusive if exact_finite => Some(true),
        Verdict::Inconclusive => None,
    }
}

/// Luecking sum against the integral criterion for one `p`.
#[derive(Debug, Clone)]
pub struct Agreement {
    pub p: f64,
    pub luecking: ShellReport,
    pub integral: ShellReport,
    /// `None` when either side is inconclusive.
    pub agree: Option<bool>,
}

/// Compares the discrete and integral criteria on a decomposition and a
/// measure binned on it. `exact_finite` marks a decomposition with no
/// residual squares and no mass left outside the boxes.
pub fn criterion_agreement(
    f: &InnerFunction,
    s: &Symbol,
    dec: &WhitneyDecomposition,
    m: &EmpiricalMeasure,
    p: f64,
    rule: VerdictRule,
    opts: &ShellOptions,
) -> Result<Agreement> {
    let luecking = luecking_sum_with(m, dec, p, rule)?;
    let integral = integral_schatten_kernel_with(f, s, p, &ShellOptions { rule, ..*opts })?;
    let exact_finite = dec.residual().is_empty()
        && m.binned().is_some_and(|b| b.residual.values().all(|&x| x == 0.0));
    let agree = match (finiteness(&luecking, exact_finite), finiteness(&integral, false)) {
        (Some(a), Some(b)) => Some(a == b),
        _ => None,
    };
    Ok(Agreement { p, luecking, integral, agree })
}

/// Hardy-space agreement for a symbol known only through `N_φ`: Luecking
/// sum of box averages of `N_φ` on the dyadic grid against the Hardy
/// integral.
pub fn hardy_agreement(s: &Symbol, levels: u32, p: f64, opts: &ShellOptions) -> Result<Agreement> {
    let dec = WhitneyDecomposition::dyadic_grid(levels);
    let m = counting_box_measure(s, &dec, 3)?;
    let mut luecking = luecking_sum_with(&m, &dec, p, opts.rule)?;
    // the last level holds whole squares, not top halves
    luecking.shells.pop();
    let luecking = ShellReport::from_increments(
        luecking.label.clone(),
        luecking
            .shells
            .iter()
            .map(|sh| (sh.inner_radius, sh.outer_radius, sh.increment, sh.error, sh.ok))
            .collect(),
        opts.rule,
        luecking.notes.clone(),
    );
    let integral = integral_schatten_hardy_with(s, p, opts)?;
    let agree = match (finiteness(&luecking, false), finiteness(&integral, false)) {
        (Some(a), Some(b)) => Some(a == b),
        _ => None,
    };
    Ok(Agreement { p, luecking, integral, agree })
}

/// Builds `D_δ` and its decomposition, validates it, bins `μ_φ` and sets
/// the Luecking sum beside the integral criterion for each `p`.
///
/// Keys: `theta.*`, `phi.*`, `run.delta`, `run.gamma`, `run.dilation`,
/// `run.max_depth`, `run.p_list`, `run.shells`, `run.tol`, `run.nodes`,
/// `run.samples`, `run.stride`, `run.geometry` (`traced` or `surrogate`).
pub fn cmd_whitney_report(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut keys = THETA_KEYS.to_vec();
    keys.extend(PHI_KEYS);
    keys.extend([
        "run.delta",
        "run.gamma",
        "run.dilation",
        "run.max_depth",
        "run.p_list",
        "run.shells",
        "run.tol",
        "run.nodes",
        "run.samples",
        "run.geometry",
        "run.resolution",
        "run.stride",
        "run.seed",
    ]);
    cfg.check_keys(&keys)?;
    let f = theta_from(cfg, "paley_wiener")?;
    let s = phi_from(cfg, "sector")?;
    let params = WhitneyParams {
        gamma: cfg.f64_or("run.gamma", 0.5)?,
        dilation: cfg.f64_or("run.dilation", 3.0)?,
        max_depth: cfg.usize_or("run.max_depth", 16)? as u32,
    };
    let p_list = cfg.p_list_or("run.p_list", &[1.0, 3.0])?;
    let opts = shell_options(cfg, 20)?;
    let nodes = cfg.usize_or("run.nodes", 4096)?;
    let dir = out_dir(out, "whitney-report")?;

    let (dec, validation) = match cfg.str_or("run.geometry", "traced") {
        "traced" => {
            let delta = cfg.f64_or("run.delta", 0.5f64.exp())?;
            let dom = level_boundary(&f, delta, cfg.f64_or("run.resolution", 1e-3)?)?;
            let dec = build_whitney(&dom, params)?;
            let rep = validate_whitney(&dec, &dom, cfg.usize_or("run.samples", 16)?);
            let bounds = dec.distance_bounds(&dom);
            let v = json!({
                "a": jnum(rep.a), "b": jnum(rep.b), "c": jnum(rep.c),
                "multiplicity": rep.multiplicity, "boxes": rep.boxes, "residual": rep.residual,
                "pass": rep.pass,
                "distance_ratio_min": jnum(bounds.m), "distance_ratio_max": jnum(bounds.big_m),
                "ahlfors_ratio": jnum(crate::geometry::ahlfors_ratio(dom.vertices(), true, 64, 24)),
            });
            (dec, v)
        }
        "surrogate" => {
            let dec = build_whitney_surrogate(&f, params)?;
            let v = json!({ "boxes": dec.boxes().len(), "residual": dec.residual().len(), "geometry": "surrogate" });
            (dec, v)
        }
        other => return Err(Error::Config(format!("unknown run.geometry `{other}`"))),
    };
    dec.save_csv(&dir.join("decomposition.csv"))?;
    let m = pullback_measure_adaptive(&s, &dec, nodes)?;
    m.save_csv(&dir.join("measure.csv"))?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &p in &p_list {
        let a = criterion_agreement(&f, &s, &dec, &m, p, opts.rule, &opts)?;
        a.luecking.save_csv(&dir.join(format!("luecking_p{p}.csv")))?;
        a.integral.save_csv(&dir.join(format!("integral_p{p}.csv")))?;
        let flag = a.agree.map_or("inconclusive".to_string(), |b| b.to_string());
        rows.push(vec![
            num(p),
            a.luecking.verdict.label().into(),
            num(a.luecking.total()),
            a.integral.verdict.label().into(),
            num(a.integral.value_or_inf()),
            flag.clone(),
        ]);
        runs.push(json!({
            "p": p,
            "luecking": a.luecking.summary_json("whitney-report", json!({ "p": p })),
            "integral": a.integral.summary_json("whitney-report", json!({ "p": p })),
            "agree": flag,
        }));
    }
    write_rows(
        &dir.join("agreement.csv"),
        &["p", "luecking_verdict", "luecking_total", "integral_verdict", "integral_value", "agree"],
        &rows,
    )?;
    let binned = m.binned().expect("adaptive pullback is binned");
    let summary = json!({
        "experiment": "whitney-report",
        "params": cfg.params_json(),
        "validation": validation,
        "measure": {
            "total": jnum(m.total_mass()),
            "residual": jnum(binned.residual.values().sum()),
            "core": jnum(binned.core),
            "clamped": binned.clamped,
        },
        "runs": runs,
        "completed": true,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome { dir, completed: true, summary })
}
