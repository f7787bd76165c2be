//! Quadrature: Gauss–Legendre panels with global adaptive bisection in one
//! and two dimensions, and periodic trapezoid rules on the circle with node
//! doubling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const PANEL_ORDER: usize = 10;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Fixed-order Gauss–Legendre rule on `[a, b]`.
pub fn gauss_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let (x, w) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        acc += wi * f(mid + half * xi);
    }
    acc * half
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panels: 4000,
        }
    }
}

impl Adaptive {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Adaptive {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// `breaks` are interior points where `f` may lose smoothness; they seed the
/// initial panel list. The error of a panel is the difference between the
/// rule on the whole panel and the sum of the rules on its halves.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    settings: Adaptive,
) -> Estimate {
    if b <= a {
        return Estimate {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));

    let mut evaluations = 0usize;
    let make = |f: &mut F, a: f64, b: f64, whole: Option<f64>, evals: &mut usize| {
        let m = 0.5 * (a + b);
        let whole = whole.unwrap_or_else(|| {
            *evals += PANEL_ORDER;
            gauss_panel(f, a, b)
        });
        let left = gauss_panel(f, a, m);
        let right = gauss_panel(f, m, b);
        *evals += 2 * PANEL_ORDER;
        Panel {
            a,
            b,
            left,
            right,
            error: (left + right - whole).abs(),
        }
    };

    let mut heap = BinaryHeap::new();
    let (mut value, mut error) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let p = make(&mut f, w[0], w[1], None, &mut evaluations);
        value += p.left + p.right;
        error += p.error;
        heap.push(p);
    }
    loop {
        let target = settings.abs_tol.max(settings.rel_tol * value.abs());
        if error <= target || heap.len() >= settings.max_panels {
            let converged = error <= target;
            // deterministic summation order
            let mut panels: Vec<Panel> = heap.into_vec();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let value = panels.iter().map(|p| p.left + p.right).sum();
            let error = panels.iter().map(|p| p.error).sum();
            return Estimate {
                value,
                error,
                converged,
                evaluations,
            };
        }
        let worst = heap.pop().expect("nonempty panel heap");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // cannot split further; accept as is
            let mut panels: Vec<Panel> = heap.into_vec();
            panels.push(worst);
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let value = panels.iter().map(|p| p.left + p.right).sum();
            return Estimate {
                value,
                error,
                converged: false,
                evaluations,
            };
        }
        value -= worst.left + worst.right;
        error -= worst.error;
        for p in [
            make(&mut f, worst.a, m, Some(worst.left), &mut evaluations),
            make(&mut f, m, worst.b, Some(worst.right), &mut evaluations),
        ] {
            value += p.left + p.right;
            error += p.error;
            heap.push(p);
        }
        error = error.max(0.0);
    }
}

const CUBE_ORDER: usize = 6;

fn cube_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(CUBE_ORDER))
}

fn tensor_panel<F: FnMut(f64, f64) -> f64>(f: &mut F, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (nodes, weights) = cube_rule();
    let (hx, mx) = (0.5 * (x1 - x0), 0.5 * (x0 + x1));
    let (hy, my) = (0.5 * (y1 - y0), 0.5 * (y0 + y1));
    let mut acc = 0.0;
    for (xi, wi) in nodes.iter().zip(weights) {
        let x = mx + hx * xi;
        let mut row = 0.0;
        for (yj, wj) in nodes.iter().zip(weights) {
            row += wj * f(x, my + hy * yj);
        }
        acc += wi * row;
    }
    acc * hx * hy
}

struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    children: [f64; 4],
    error: f64,
}

impl Rect {
    fn new<F: FnMut(f64, f64) -> f64>(f: &mut F, x0: f64, x1: f64, y0: f64, y1: f64, whole: Option<f64>) -> Self {
        let whole = whole.unwrap_or_else(|| tensor_panel(f, x0, x1, y0, y1));
        let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let children = [
            tensor_panel(f, x0, xm, y0, ym),
            tensor_panel(f, xm, x1, y0, ym),
            tensor_panel(f, x0, xm, ym, y1),
            tensor_panel(f, xm, x1, ym, y1),
        ];
        let error = (children.iter().sum::<f64>() - whole).abs();
        Rect {
            x0,
            x1,
            y0,
            y1,
            children,
            error,
        }
    }

    fn value(&self) -> f64 {
        self.children.iter().sum()
    }
}

impl PartialEq for Rect {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Rect {}
impl PartialOrd for Rect {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Rect {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive tensor Gauss–Legendre cubature over the rectangle
/// spanned by `x_cuts` × `y_cuts` (each sorted, at least two entries),
/// which also seed the initial panels. A panel's error is the difference
/// between its rule and the sum of the rules on its four quadrants.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    x_cuts: &[f64],
    y_cuts: &[f64],
    settings: Adaptive,
) -> Estimate {
    let per_panel = 5 * CUBE_ORDER * CUBE_ORDER;
    let mut evaluations = 0usize;
    let mut heap = BinaryHeap::new();
    let (mut value, mut error) = (0.0, 0.0);
    for wx in x_cuts.windows(2) {
        for wy in y_cuts.windows(2) {
            if wx[1] <= wx[0] || wy[1] <= wy[0] {
                continue;
            }
            let r = Rect::new(&mut f, wx[0], wx[1], wy[0], wy[1], None);
            evaluations += per_panel;
            value += r.value();
            error += r.error;
            heap.push(r);
        }
    }
    let finish = |heap: BinaryHeap<Rect>, converged: bool, evaluations: usize| {
        let mut panels = heap.into_vec();
        panels.sort_by(|p, q| p.x0.total_cmp(&q.x0).then(p.y0.total_cmp(&q.y0)));
        Estimate {
            value: panels.iter().map(Rect::value).sum(),
            error: panels.iter().map(|p| p.error).sum(),
            converged,
            evaluations,
        }
    };
    loop {
        let target = settings.abs_tol.max(settings.rel_tol * value.abs());
        if error <= target || heap.len() >= settings.max_panels {
            return finish(heap, error <= target, evaluations);
        }
        let worst = heap.pop().expect("nonempty panel heap");
        let (xm, ym) = (0.5 * (worst.x0 + worst.x1), 0.5 * (worst.y0 + worst.y1));
        if xm <= worst.x0 || xm >= worst.x1 || ym <= worst.y0 || ym >= worst.y1 {
            heap.push(worst);
            return finish(heap, false, evaluations);
        }
        value -= worst.value();
        error -= worst.error;
        let c = worst.children;
        for r in [
            Rect::new(&mut f, worst.x0, xm, worst.y0, ym, Some(c[0])),
            Rect::new(&mut f, xm, worst.x1, worst.y0, ym, Some(c[1])),
            Rect::new(&mut f, worst.x0, xm, ym, worst.y1, Some(c[2])),
            Rect::new(&mut f, xm, worst.x1, ym, worst.y1, Some(c[3])),
        ] {
            evaluations += 4 * CUBE_ORDER * CUBE_ORDER;
            value += r.value();
            error += r.error;
            heap.push(r);
        }
        error = error.max(0.0);
    }
}

/// Breakpoints graded geometrically toward `center`: `center ± scale·2^j`
/// for `j = 0, 1, ...` until the offset exceeds `reach`.
pub fn graded_breaks(center: f64, scale: f64, reach: f64, out: &mut Vec<f64>) {
    out.push(center);
    if scale <= 0.0 {
        return;
    }
    let mut h = scale;
    while h < reach {
        out.push(center - h);
        out.push(center + h);
        h *= 2.0;
    }
}

/// Normalized circle average `(1/2π) ∫_0^{2π} f(t) dt` of a vector-valued
/// integrand by the trapezoid rule with node doubling.
///
/// `f(t, out)` writes `dim` components. Iteration stops once the largest
/// componentwise change is below `rel_tol` times the largest component.
pub fn circle_average(
    mut f: impl FnMut(f64, &mut [f64]),
    dim: usize,
    rel_tol: f64,
    min_nodes: usize,
    max_nodes: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut n = min_nodes.max(4).next_power_of_two();
    let mut buf = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        f(t, &mut buf);
        for (s, b) in sum.iter_mut().zip(&buf) {
            *s += b;
        }
    }
    let mut current: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    loop {
        if 2 * n > max_nodes {
            return Err(Error::numeric(
                "circle quadrature",
                format!("no convergence to {rel_tol:e} within {max_nodes} nodes"),
            ));
        }
        for k in 0..n {
            let t = 2.0 * PI * (2 * k + 1) as f64 / (2 * n) as f64;
            f(t, &mut buf);
            for (s, b) in sum.iter_mut().zip(&buf) {
                *s += b;
            }
        }
        n *= 2;
        let next: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = next
            .iter()
            .zip(&current)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        current = next;
        if change <= rel_tol * scale || scale == 0.0 {
            return Ok((current, n));
        }
    }
}
