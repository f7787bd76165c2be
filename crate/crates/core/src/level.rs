//! Level domains `D_δ = {|ϑ| < δ}` traced as closed polylines, with a
//! segment tree for distance queries.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::inner::{DiskPoint, InnerFunction, SPECTRUM_EXCLUSION};

/// Knobs for [`level_boundary_with`].
#[derive(Debug, Clone, Copy)]
pub struct LevelOptions {
    /// Maximum segment length.
    pub resolution: f64,
    /// Relative tolerance on `|ϑ|` at the vertices.
    pub rel_tol: f64,
    /// Tracing stops this close to a spectrum point.
    pub exclusion: f64,
    /// The curve must stay inside `|z| < bbox`.
    pub bbox: f64,
    pub max_vertices: usize,
    /// Uniformly spaced seed rays in addition to the zero/atom rays.
    pub uniform_seeds: usize,
}

impl Default for LevelOptions {
    fn default() -> Self {
        LevelOptions {
            resolution: 1e-3,
            rel_tol: 1e-6,
            exclusion: SPECTRUM_EXCLUSION,
            bbox: 1e3,
            max_vertices: 4_000_000,
            uniform_seeds: 16,
        }
    }
}

/// Closed polyline approximating `∂D_δ`, counterclockwise.
#[derive(Debug, Clone)]
pub struct LevelDomain {
    delta: f64,
    resolution: f64,
    tolerance: f64,
    vertices: Vec<Complex64>,
    singular: Vec<bool>,
    spectrum: Vec<Complex64>,
    chord_error: f64,
    max_residual: f64,
    single_trace: bool,
    tree: SegmentTree,
}

impl LevelDomain {
    /// Wraps an arbitrary closed polyline; no level-set checks are made.
    pub fn from_polyline(
        delta: f64,
        vertices: Vec<Complex64>,
        resolution: f64,
        spectrum: Vec<Complex64>,
    ) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry("a closed polyline needs three vertices".into()));
        }
        let singular = vertices
            .iter()
            .map(|v| spectrum.iter().any(|s| (v - s).norm() < 1e-12))
            .collect();
        let tree = SegmentTree::closed(&vertices);
        Ok(LevelDomain {
            delta,
            resolution,
            tolerance: 0.0,
            vertices,
            singular,
            spectrum,
            chord_error: 0.0,
            max_residual: 0.0,
            single_trace: true,
            tree,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Declared bound on `| |ϑ(v)| − δ |` at regular vertices.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Largest observed `| |ϑ(v)| − δ |` over regular vertices.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Largest distance from a segment midpoint to the level set, measured
    /// by projecting the midpoint back onto the curve.
    pub fn chord_error(&self) -> f64 {
        self.chord_error
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    /// True for vertices placed at spectrum points, where `|ϑ|` is undefined.
    pub fn is_singular(&self, i: usize) -> bool {
        self.singular[i]
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// True when every seed ray landed on the traced curve.
    pub fn single_trace(&self) -> bool {
        self.single_trace
    }

    pub fn segments(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Euclidean distance to the polyline.
    pub fn distance(&self, z: Complex64) -> f64 {
        self.tree.distance(z)
    }

    /// Point-in-polygon test by crossing parity.
    pub fn contains(&self, z: Complex64) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if x > z.re {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance to the nearest spectrum point (infinite when `Σ(ϑ) = ∅`).
    pub fn spectrum_distance(&self, z: Complex64) -> f64 {
        self.spectrum
            .iter()
            .map(|s| (z - s).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Least-squares circle through the vertices: `(center, radius, max
    /// radial deviation)`.
    pub fn circle_fit(&self) -> Option<(Complex64, f64, f64)> {
        circle_fit(&self.vertices)
    }
}

/// Algebraic least-squares circle fit `x² + y² + Dx + Ey + F = 0`.
pub fn circle_fit(points: &[Complex64]) -> Option<(Complex64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let shift = points.iter().sum::<Complex64>() / points.len() as f64;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for p in points {
        let q = p - shift;
        let row = Vector3::new(q.re, q.im, 1.0);
        ata += row * row.transpose();
        atb += row * -(q.norm_sqr());
    }
    let sol = ata.lu().solve(&atb)?;
    let center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = center.norm_sqr() - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    let radius = r2.sqrt();
    let dev = points
        .iter()
        .map(|p| ((p - shift - center).norm() - radius).abs())
        .fold(0.0, f64::max);
    Some((center + shift, radius, dev))
}

/// `∂D_δ` with default options and the given resolution.
pub fn level_boundary(f: &InnerFunction, delta: f64, resolution: f64) -> Result<LevelDomain> {
    level_boundary_with(
        f,
        delta,
        LevelOptions {
            resolution,
            ..Default::default()
        },
    )
}

/// Traces `{|ϑ| = δ}` by arc-length continuation with Newton correction on
/// `log|ϑ| − log δ`, starting from roots on seed rays. Arcs that run into
/// spectrum points are joined through those points.
pub fn level_boundary_with(f: &InnerFunction, delta: f64, opts: LevelOptions) -> Result<LevelDomain> {
    if !(delta > 1.0) || !delta.is_finite() {
        return Err(Error::Parameter(format!("level δ = {delta} must exceed 1")));
    }
    if !(opts.resolution > 0.0) || !(opts.rel_tol > 0.0) {
        return Err(Error::Parameter("resolution and tolerance must be positive".into()));
    }
    let tracer = Tracer {
        f,
        log_delta: delta.ln(),
        spectrum: f.spectrum(opts.exclusion),
        opts,
    };

    let seeds = tracer.seeds();
    if seeds.is_empty() {
        return Err(Error::Geometry(format!(
            "no seed ray meets |ϑ| = {delta} inside radius {}",
            opts.bbox
        )));
    }

    let mut arcs: Vec<Arc> = Vec::new();
    let mut single_trace = true;
    for &seed in &seeds {
        let near_existing = arcs
            .iter()
            .any(|a| polyline_distance(&a.points, seed) <= 4.0 * opts.resolution);
        if near_existing {
            continue;
        }
        if !arcs.is_empty() {
            single_trace = false;
        }
        arcs.push(tracer.trace_through(seed)?);
    }

    let (vertices, singular) = assemble(&arcs, &tracer.spectrum, &mut single_trace)?;
    let tree = SegmentTree::closed(&vertices);
    let mut dom = LevelDomain {
        delta,
        resolution: opts.resolution,
        tolerance: opts.rel_tol * delta,
        vertices,
        singular,
        spectrum: tracer.spectrum.clone(),
        chord_error: 0.0,
        max_residual: 0.0,
        single_trace,
        tree,
    };
    if !dom.contains(Complex64::new(0.0, 0.0)) {
        return Err(Error::Geometry(format!(
            "traced curve for δ = {delta} does not enclose the origin (D_δ may be unbounded or multiply connected)"
        )));
    }
    tracer.measure(&mut dom)?;
    Ok(dom)
}

/// `(dist(z, ∂D_δ), (1 − |z|²)/(1 − |ϑ(z)|²))`.
pub fn dist_and_surrogate(f: &InnerFunction, dom: &LevelDomain, z: Complex64) -> Result<(f64, f64)> {
    if f.spectrum(SPECTRUM_EXCLUSION)
        .iter()
        .any(|s| (z - s).norm() < SPECTRUM_EXCLUSION)
    {
        return Err(Error::Pole {
            point: z,
            what: "surrogate undefined next to the spectrum".into(),
        });
    }
    if z.norm() > 1.0 {
        return Err(Error::Parameter(format!("{z} is outside the closed disk")));
    }
    let kd = f.kernel_diag(DiskPoint::new(z))?;
    Ok((dom.distance(z), 1.0 / kd))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Closed,
    Spectrum(usize),
}

/// A traced piece of the level curve, counterclockwise. For an arc between
/// spectrum points `start`/`end` name them; a closed loop has both `Closed`.
#[derive(Debug, Clone)]
struct Arc {
    points: Vec<Complex64>,
    start: End,
    end: End,
}

struct Tracer<'a> {
    f: &'a InnerFunction,
    log_delta: f64,
    spectrum: Vec<Complex64>,
    opts: LevelOptions,
}

impl Tracer<'_> {
    fn residual(&self, z: Complex64) -> Result<(f64, Complex64)> {
        let lm = self.f.log_modulus(z)?;
        let g = self.f.log_derivative(z)?;
        Ok((lm - self.log_delta, g))
    }

    /// Rounding floor of `log|ϑ|` near `z`.
    fn noise(&self, z: Complex64, g: Complex64) -> f64 {
        8.0 * f64::EPSILON * g.norm() * z.norm().max(1.0) + 1e-15
    }

    fn spectrum_distance(&self, z: Complex64) -> (f64, usize) {
        self.spectrum
            .iter()
            .enumerate()
            .map(|(i, s)| ((z - s).norm(), i))
            .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a })
    }

    fn seeds(&self) -> Vec<Complex64> {
        let mut dirs: Vec<f64> = Vec::new();
        for a in self.f.zeros() {
            if !a.is_origin() {
                dirs.push(a.angle());
            }
        }
        for a in self.f.atoms() {
            dirs.push(a.angle() + PI);
        }
        let n = self.opts.uniform_seeds.max(1);
        for k in 0..n {
            dirs.push(2.0 * PI * (k as f64 + 0.125) / n as f64);
        }
        dirs.iter().filter_map(|&t| self.root_on_ray(t)).collect()
    }

    /// First crossing of `|ϑ| = δ` along `r·e^{it}`, `r > 1`.
    fn root_on_ray(&self, t: f64) -> Option<Complex64> {
        let dir = Complex64::from_polar(1.0, t);
        let eval = |r: f64| -> f64 {
            match self.f.log_modulus(dir * r) {
                Ok(v) => v - self.log_delta,
                Err(_) => f64::INFINITY,
            }
        };
        let mut lo = 1.0 + 1e-9;
        if !(eval(lo) < 0.0) {
            return None;
        }
        let mut step = 1e-9;
        let mut hi;
        loop {
            step *= 1.5;
            hi = 1.0 + step;
            if hi > self.opts.bbox {
                return None;
            }
            if eval(hi) >= 0.0 {
                break;
            }
            lo = hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = dir * lo;
        self.correct(z, (hi - lo).max(1e-12) * 4.0 + 1e-12).or(Some(z))
    }

    /// Newton projection onto the level set, staying within `h/2` of `z0`.
    fn correct(&self, z0: Complex64, h: f64) -> Option<Complex64> {
        let mut z = z0;
        for _ in 0..40 {
            let (fz, g) = self.residual(z).ok()?;
            if !fz.is_finite() || g.norm() == 0.0 || !g.norm().is_finite() {
                return None;
            }
            if fz.abs() <= self.noise(z, g).max(1e-14) {
                return Some(z);
            }
            let step = fz / g;
            z -= step;
            if (z - z0).norm() > 0.5 * h {
                return None;
            }
            if step.norm() <= 4.0 * f64::EPSILON * z.norm() {
                break;
            }
        }
        let (fz, g) = self.residual(z).ok()?;
        (fz.abs() <= (4.0 * self.noise(z, g)).max(1e-12)).then_some(z)
    }

    fn tangent(g: Complex64, orient: f64) -> Complex64 {
        Complex64::new(0.0, orient) * g.conj() / g.norm()
    }

    /// Follows the curve from `seed` until it closes or reaches the spectrum.
    fn trace_arc(&self, seed: Complex64, orient: f64) -> Result<(Vec<Complex64>, End)> {
        let res = self.opts.resolution;
        let hmax = res / 1.25;
        let mut pts = Vec::new();
        let mut z = seed;
        let mut h = hmax / 4.0;
        let mut travelled = 0.0;
        loop {
            let (_, g) = self.residual(z)?;
            let t = Self::tangent(g, orient);
            let (ds, _) = self.spectrum_distance(z);
            h = h.min(hmax).min(0.25 * ds);
            let (zn, turn) = loop {
                if h < 1e-14 * z.norm().max(1.0) {
                    return Err(Error::Geometry(format!(
                        "continuation step underflow at {z} (|ϑ| = δ tracing)"
                    )));
                }
                let zp = z + t * h;
                if let Some(zn) = self.correct(zp, h) {
                    let (_, gn) = self.residual(zn)?;
                    let turn = (Self::tangent(gn, orient) / t).arg().abs();
                    if turn <= 0.2 && (zn - z).norm() <= res {
                        break (zn, turn);
                    }
                }
                h *= 0.5;
            };
            travelled += (zn - z).norm();
            pts.push(zn);
            z = zn;
            if turn < 0.05 {
                h *= 1.5;
            }
            if z.norm() > self.opts.bbox {
                return Err(Error::Geometry(format!(
                    "level curve left the bounding disk of radius {} near {z}",
                    self.opts.bbox
                )));
            }
            if pts.len() > self.opts.max_vertices {
                return Err(Error::Geometry(format!(
                    "level curve exceeded {} vertices",
                    self.opts.max_vertices
                )));
            }
            if travelled > 2.0 * res && pts.len() >= 3 && (z - seed).norm() <= res {
                return Ok((pts, End::Closed));
            }
            let (ds, idx) = self.spectrum_distance(z);
            if idx != usize::MAX {
                let (_, g) = self.residual(z)?;
                let too_noisy = self.noise(z, g) > 0.25 * self.opts.rel_tol;
                if ds < self.opts.exclusion || too_noisy {
                    return Ok((pts, End::Spectrum(idx)));
                }
            }
        }
    }

    fn trace_through(&self, seed: Complex64) -> Result<Arc> {
        let (fwd, end) = self.trace_arc(seed, 1.0)?;
        if end == End::Closed {
            let mut points = vec![seed];
            points.extend(fwd);
            return Ok(Arc {
                points,
                start: End::Closed,
                end: End::Closed,
            });
        }
        let (bwd, start) = self.trace_arc(seed, -1.0)?;
        if start == End::Closed {
            return Err(Error::Geometry(
                "level curve closed in one direction only".into(),
            ));
        }
        let mut points: Vec<Complex64> = bwd.into_iter().rev().collect();
        points.push(seed);
        points.extend(fwd);
        Ok(Arc { points, start, end })
    }

    /// Vertex residuals and midpoint chord errors.
    fn measure(&self, dom: &mut LevelDomain) -> Result<()> {
        let n = dom.vertices.len();
        let mut max_res: f64 = 0.0;
        let mut chord: f64 = 0.0;
        for i in 0..n {
            if dom.singular[i] {
                continue;
            }
            let v = dom.vertices[i];
            let lm = self.f.log_modulus(v)?;
            max_res = max_res.max((dom.delta * (lm - self.log_delta).exp_m1()).abs());
            let j = (i + 1) % n;
            if dom.singular[j] {
                continue;
            }
            let m = 0.5 * (v + dom.vertices[j]);
            let len = (dom.vertices[j] - v).norm();
            if let Some(p) = self.correct(m, 2.0 * len + 1e-12) {
                chord = chord.max((p - m).norm());
            } else {
                chord = chord.max(len);
            }
        }
        dom.max_residual = max_res;
        dom.chord_error = chord;
        Ok(())
    }
}

/// Chains arcs through shared spectrum points into closed polygons and
/// keeps the one of largest area. Several candidates mean `D_δ` was not
/// found as a single simple trace.
fn assemble(
    arcs: &[Arc],
    spectrum: &[Complex64],
    single_trace: &mut bool,
) -> Result<(Vec<Complex64>, Vec<bool>)> {
    let open: Vec<&Arc> = arcs.iter().filter(|a| a.end != End::Closed).collect();
    let mut candidates: Vec<(Vec<Complex64>, Vec<bool>)> = arcs
        .iter()
        .filter(|a| a.end == End::Closed)
        .map(|a| (a.points.clone(), vec![false; a.points.len()]))
        .collect();
    let mut used = vec![false; open.len()];
    let mut broken = None;
    for first in 0..open.len() {
        if used[first] {
            continue;
        }
        used[first] = true;
        let mut verts = Vec::new();
        let mut singular = Vec::new();
        let mut current = open[first];
        loop {
            verts.extend(current.points.iter().copied());
            singular.extend(std::iter::repeat_n(false, current.points.len()));
            let End::Spectrum(e) = current.end else { unreachable!() };
            verts.push(spectrum[e]);
            singular.push(true);
            if current.end == open[first].start {
                candidates.push((verts, singular));
                break;
            }
            match (0..open.len()).find(|&k| !used[k] && open[k].start == End::Spectrum(e)) {
                Some(k) => {
                    used[k] = true;
                    current = open[k];
                }
                None => {
                    broken = Some(spectrum[e]);
                    break;
                }
            }
        }
    }
    if candidates.len() > 1 {
        *single_trace = false;
    }
    match candidates
        .into_iter()
        .max_by(|a, b| signed_area(&a.0).total_cmp(&signed_area(&b.0)))
    {
        Some(best) => Ok(best),
        None => Err(match broken {
            Some(p) => Error::Geometry(format!(
                "level curve could not be continued past the spectrum point {p}"
            )),
            None => Error::Geometry("no level curve traced".into()),
        }),
    }
}

fn signed_area(pts: &[Complex64]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.re * b.im - a.im * b.re
        })
        .sum::<f64>()
        * 0.5
}

fn polyline_distance(pts: &[Complex64], z: Complex64) -> f64 {
    if pts.len() == 1 {
        return (pts[0] - z).norm();
    }
    pts.windows(2)
        .map(|w| segment_distance(w[0], w[1], z))
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `z` to the segment `[a, b]`.
pub fn segment_distance(a: Complex64, b: Complex64, z: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a) * d.conj()).re / len2;
    let t = t.clamp(0.0, 1.0);
    (a + d * t - z).norm()
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Complex64,
    hi: Complex64,
}

impl Aabb {
    fn of(a: Complex64, b: Complex64) -> Self {
        Aabb {
            lo: Complex64::new(a.re.min(b.re), a.im.min(b.im)),
            hi: Complex64::new(a.re.max(b.re), a.im.max(b.im)),
        }
    }

    fn join(self, o: Aabb) -> Self {
        Aabb {
            lo: Complex64::new(self.lo.re.min(o.lo.re), self.lo.im.min(o.lo.im)),
            hi: Complex64::new(self.hi.re.max(o.hi.re), self.hi.im.max(o.hi.im)),
        }
    }

    fn distance(&self, z: Complex64) -> f64 {
        let dx = (self.lo.re - z.re).max(0.0).max(z.re - self.hi.re);
        let dy = (self.lo.im - z.im).max(0.0).max(z.im - self.hi.im);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bbox: Aabb, first: usize, count: usize },
    Split { bbox: Aabb, left: usize, right: usize },
}

impl Node {
    fn bbox(&self) -> Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Split { bbox, .. } => *bbox,
        }
    }
}

/// Bounding-box hierarchy over polyline segments.
#[derive(Debug, Clone)]
struct SegmentTree {
    segs: Vec<(Complex64, Complex64)>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 8;

impl SegmentTree {
    fn closed(vertices: &[Complex64]) -> Self {
        let n = vertices.len();
        let mut segs: Vec<(Complex64, Complex64)> =
            (0..n).map(|i| (vertices[i], vertices[(i + 1) % n])).collect();
        let mut nodes = Vec::new();
        if !segs.is_empty() {
            let len = segs.len();
            Self::build(&mut segs, 0, len, &mut nodes);
        }
        SegmentTree { segs, nodes }
    }

    fn build(segs: &mut [(Complex64, Complex64)], first: usize, count: usize, nodes: &mut Vec<Node>) -> usize {
        let slice = &mut segs[first..first + count];
        let bbox = slice
            .iter()
            .map(|&(a, b)| Aabb::of(a, b))
            .reduce(Aabb::join)
            .expect("nonempty slice");
        let id = nodes.len();
        if count <= LEAF_SIZE {
            nodes.push(Node::Leaf { bbox, first, count });
            return id;
        }
        let wide = (bbox.hi.re - bbox.lo.re) >= (bbox.hi.im - bbox.lo.im);
        let key = |s: &(Complex64, Complex64)| {
            let c = s.0 + s.1;
            if wide {
                c.re
            } else {
                c.im
            }
        };
        slice.sort_by(|x, y| key(x).total_cmp(&key(y)));
        nodes.push(Node::Leaf { bbox, first, count });
        let half = count / 2;
        let left = Self::build(segs, first, half, nodes);
        let right = Self::build(segs, first + half, count - half, nodes);
        nodes[id] = Node::Split { bbox, left, right };
        id
    }

    fn distance(&self, z: Complex64) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bbox().distance(z) >= best {
                continue;
            }
            match *node {
                Node::Leaf { first, count, .. } => {
                    for &(a, b) in &self.segs[first..first + count] {
                        best = best.min(segment_distance(a, b, z));
                    }
                }
                Node::Split { left, right, .. } => {
                    let dl = self.nodes[left].bbox().distance(z);
                    let dr = self.nodes[right].bbox().distance(z);
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}
