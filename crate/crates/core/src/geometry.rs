//! Carleson boxes in polar coordinates, the good/bad Whitney-type
//! decomposition of the annulus `{1/2 < |z| ≤ 1}` relative to a level
//! domain, and geometric diagnostics.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::{DiskPoint, InnerFunction};
use crate::level::{segment_distance, LevelDomain};

const TAU: f64 = 2.0 * PI;

/// Angle of `z` in `[0, 2π)`.
pub fn angle_of(z: Complex64) -> f64 {
    let t = z.im.atan2(z.re);
    if t < 0.0 {
        (t + TAU).min(TAU.next_down())
    } else {
        t
    }
}

/// Width of the angular cells at `level`: `(π/2)·2^{−level}`.
pub fn cell_width(level: u32) -> f64 {
    FRAC_PI_2 / 2f64.powi(level as i32)
}

/// Index of the angular cell at `level` containing the angle `t ∈ [0, 2π)`.
pub fn cell_index(t: f64, level: u32) -> u64 {
    let n = 4u64 << level;
    ((t / TAU * n as f64).floor() as u64).min(n - 1)
}

/// A polar box from the dyadic tree over the four quadrants:
/// `θ ∈ [j·w, (j+1)·w)` with `w = (π/2)·2^{−level}`, and
/// `r ∈ (1 − 2^{−inner}, 1 − 2^{−outer}]` (`outer = None` means `r ≤ 1`).
///
/// The Carleson square at `level` has `inner = level + 1` and reaches the
/// circle; its upper half stops at `outer = level + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicBox {
    pub level: u32,
    pub index: u64,
    pub inner: u32,
    pub outer: Option<u32>,
}

impl DyadicBox {
    /// Carleson square `(level, index)`.
    pub fn square(level: u32, index: u64) -> Self {
        DyadicBox {
            level,
            index,
            inner: level + 1,
            outer: None,
        }
    }

    pub fn is_square(&self) -> bool {
        self.outer.is_none() && self.inner == self.level + 1
    }

    /// The half of a square away from the circle.
    pub fn upper_half(&self) -> Self {
        DyadicBox {
            outer: Some(self.inner + 1),
            ..*self
        }
    }

    /// The two squares splitting the half next to the circle.
    pub fn lower_children(&self) -> [Self; 2] {
        [
            Self::square(self.level + 1, 2 * self.index),
            Self::square(self.level + 1, 2 * self.index + 1),
        ]
    }

    pub fn r_lo(&self) -> f64 {
        1.0 - 2f64.powi(-(self.inner as i32))
    }

    pub fn r_hi(&self) -> f64 {
        match self.outer {
            Some(k) => 1.0 - 2f64.powi(-(k as i32)),
            None => 1.0,
        }
    }

    pub fn arc_length(&self) -> f64 {
        cell_width(self.level)
    }

    pub fn angle_lo(&self) -> f64 {
        self.index as f64 * self.arc_length()
    }

    pub fn arc_center(&self) -> f64 {
        (self.index as f64 + 0.5) * self.arc_length()
    }

    pub fn sector(&self) -> Sector {
        Sector {
            r_lo: self.r_lo(),
            r_hi: self.r_hi(),
            t_lo: self.angle_lo(),
            width: self.arc_length(),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.sector().diameter()
    }

    pub fn area(&self) -> f64 {
        self.sector().area()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        r > self.r_lo() && r <= self.r_hi() && cell_index(angle_of(z), self.level) == self.index
    }

    /// Exact test for half-open boxes of the same tree.
    pub fn intersects(&self, other: &DyadicBox) -> bool {
        let radial = self.inner < other.outer.unwrap_or(u32::MAX)
            && other.inner < self.outer.unwrap_or(u32::MAX);
        if !radial {
            return false;
        }
        let (lo1, hi1) = self.fine_range(self.level.max(other.level));
        let (lo2, hi2) = other.fine_range(self.level.max(other.level));
        lo1 < hi2 && lo2 < hi1
    }

    fn fine_range(&self, level: u32) -> (u128, u128) {
        let shift = level - self.level;
        ((self.index as u128) << shift, ((self.index as u128) + 1) << shift)
    }

    /// The dilate `aW`: same center, arc `a·w`, radial depth `a·(1 − r_lo)`.
    pub fn dilate(&self, a: f64) -> Sector {
        let width = (a * self.arc_length()).min(TAU);
        let depth = a * (1.0 - self.r_lo());
        Sector {
            r_lo: (1.0 - depth).max(0.0),
            r_hi: 1.0,
            t_lo: self.arc_center() - 0.5 * width,
            width,
        }
    }
}

/// Annular sector `r ∈ (r_lo, r_hi]`, `θ ∈ [t_lo, t_lo + width)` (mod 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub r_lo: f64,
    pub r_hi: f64,
    pub t_lo: f64,
    pub width: f64,
}

impl Sector {
    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        if !(r > self.r_lo && r <= self.r_hi) {
            return false;
        }
        if self.width >= TAU {
            return true;
        }
        (angle_of(z) - self.t_lo).rem_euclid(TAU) < self.width
    }

    pub fn area(&self) -> f64 {
        0.5 * self.width.min(TAU) * (self.r_hi * self.r_hi - self.r_lo * self.r_lo)
    }

    /// Exact diameter of the annular sector.
    pub fn diameter(&self) -> f64 {
        let w = self.width.min(TAU);
        let outer_chord = if w >= PI { 2.0 * self.r_hi } else { 2.0 * self.r_hi * (0.5 * w).sin() };
        let cross = (self.r_lo * self.r_lo + self.r_hi * self.r_hi
            - 2.0 * self.r_lo * self.r_hi * w.min(PI).cos())
        .max(0.0)
        .sqrt();
        outer_chord.max(cross).max(self.r_hi - self.r_lo)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::from_polar(0.5 * (self.r_lo + self.r_hi), self.t_lo + 0.5 * self.width)
    }

    /// Distance from the polar center to the sector boundary.
    pub fn inradius(&self) -> f64 {
        let rc = 0.5 * (self.r_lo + self.r_hi);
        let radial = 0.5 * (self.r_hi - self.r_lo);
        let half = 0.5 * self.width;
        let side = if half >= FRAC_PI_2 { rc } else { rc * half.sin() };
        radial.min(side)
    }

    /// Boundary points with consecutive spacing at most `spacing`, and the
    /// covering radius of the boundary they achieve.
    pub fn boundary_samples(&self, spacing: f64) -> (Vec<Complex64>, f64) {
        let mut pts = Vec::new();
        let mut cover: f64 = 0.0;
        let arc_count = |r: f64| ((r * self.width / spacing).ceil() as usize).max(2);
        for r in [self.r_lo, self.r_hi] {
            let n = arc_count(r);
            for k in 0..=n {
                pts.push(Complex64::from_polar(r, self.t_lo + self.width * k as f64 / n as f64));
            }
            cover = cover.max(0.5 * r * self.width / n as f64);
        }
        if self.width < TAU {
            let h = self.r_hi - self.r_lo;
            let n = ((h / spacing).ceil() as usize).max(2);
            for t in [self.t_lo, self.t_lo + self.width] {
                for k in 1..n {
                    pts.push(Complex64::from_polar(self.r_lo + h * k as f64 / n as f64, t));
                }
            }
            cover = cover.max(0.5 * h / n as f64);
        }
        (pts, cover)
    }

    /// `rows × cols` interior points on a polar grid (cell midpoints).
    pub fn interior_grid(&self, rows: usize, cols: usize) -> Vec<Complex64> {
        let mut pts = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let r = self.r_lo + (self.r_hi - self.r_lo) * (i as f64 + 0.5) / rows as f64;
            for j in 0..cols {
                let t = self.t_lo + self.width * (j as f64 + 0.5) / cols as f64;
                pts.push(Complex64::from_polar(r, t));
            }
        }
        pts
    }
}

/// Role of a box in the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxKind {
    Good,
    UpperHalf,
}

impl BoxKind {
    pub fn label(&self) -> &'static str {
        match self {
            BoxKind::Good => "good",
            BoxKind::UpperHalf => "upper-half",
        }
    }
}

/// Member `G_i` of a decomposition with its supporting square `W_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhitneyBox {
    pub region: DyadicBox,
    pub support: DyadicBox,
    pub kind: BoxKind,
    pub depth: u32,
    /// Smallest sampled distance from the box boundary to `∂D_δ`.
    pub dist_to_boundary: f64,
}

impl WhitneyBox {
    pub fn diameter(&self) -> f64 {
        self.region.diameter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Box(usize),
    Split { upper: usize },
    Residual(usize),
}

/// Where a point falls in a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Box(usize),
    Residual(usize),
    /// `|z| ≤ 1/2`, outside the annulus.
    Core,
    /// Outside the closed disk.
    Outside,
}

/// Whitney-type family `{G_i}` over `{1/2 < |z| ≤ 1}`.
#[derive(Debug, Clone)]
pub struct WhitneyDecomposition {
    boxes: Vec<WhitneyBox>,
    residual: Vec<DyadicBox>,
    gamma: f64,
    delta: f64,
    dilation: f64,
    max_depth: u32,
    tree: HashMap<(u32, u64), Node>,
}

/// Settings for [`build_whitney`].
#[derive(Debug, Clone, Copy)]
pub struct WhitneyParams {
    pub gamma: f64,
    pub dilation: f64,
    pub max_depth: u32,
}

impl Default for WhitneyParams {
    fn default() -> Self {
        WhitneyParams {
            gamma: 0.5,
            dilation: 3.0,
            max_depth: 24,
        }
    }
}

/// Conservative lower bound and raw sampled value of `dist(S, ∂D_δ)`.
///
/// The boundary of `S` is sampled densely; since `∂D_δ` cannot lie inside
/// `S` without crossing its boundary, subtracting the sample covering
/// radius and the polyline chord error bounds the set distance from below.
pub fn box_distance(sector: &Sector, dom: &LevelDomain) -> (f64, f64) {
    let spacing = sector.diameter() / 24.0;
    let (pts, cover) = sector.boundary_samples(spacing);
    let raw = pts.iter().map(|&p| dom.distance(p)).fold(f64::INFINITY, f64::min);
    (raw - cover - dom.chord_error(), raw)
}

/// Good/bad subdivision: a square `S` is good when `dist(S, ∂D_δ) > γ·d(S)`
/// and is emitted whole; otherwise its upper half is emitted and the two
/// squares of its lower half are examined at the next depth. Bad squares at
/// `max_depth` are left in the residual.
pub fn build_whitney(dom: &LevelDomain, params: WhitneyParams) -> Result<WhitneyDecomposition> {
    build_whitney_by(|s| box_distance(s, dom), dom.delta(), params)
}

/// Lower bound and representative value of `min_{z ∈ S} (1 − |z|²)/(1 − |ϑ(z)|²)`
/// from boundary and interior samples; the surrogate for `dist(z, ∂D_δ)`.
pub fn surrogate_box_distance(f: &InnerFunction, sector: &Sector) -> (f64, f64) {
    let (pts, _) = sector.boundary_samples(sector.diameter() / 24.0);
    let mut samples: Vec<DiskPoint> = pts.into_iter().map(DiskPoint::new).collect();
    samples.extend(sector.interior_grid(8, 8).into_iter().map(DiskPoint::new));
    // zeros inside the box, in gap form: the surrogate dips to ≈ 1 − |a|
    // there, on a scale far below any sample spacing
    for a in f.zeros() {
        let dt = (a.angle() - sector.t_lo).rem_euclid(TAU);
        if dt < sector.width && 1.0 - a.gap() >= sector.r_lo && 1.0 - a.gap() <= sector.r_hi {
            samples.push(DiskPoint::from_gap(a.gap(), a.angle()));
        }
    }
    let min = samples
        .iter()
        .map(|&p| match f.kernel_diag(p) {
            Ok(k) if k > 0.0 => 1.0 / k,
            _ => 0.0,
        })
        .fold(f64::INFINITY, f64::min);
    (min, min)
}

/// The good/bad subdivision run on the kernel surrogate instead of a traced
/// level curve. Usable when `∂D_δ` cannot be traced, e.g. zeros closer to
/// the circle than the working precision.
pub fn build_whitney_surrogate(f: &InnerFunction, params: WhitneyParams) -> Result<WhitneyDecomposition> {
    build_whitney_by(|s| surrogate_box_distance(f, s), f64::NAN, params)
}

/// The subdivision driven by a box-distance function returning a lower
/// bound and a representative value.
pub fn build_whitney_by(
    distance: impl Fn(&Sector) -> (f64, f64),
    delta: f64,
    params: WhitneyParams,
) -> Result<WhitneyDecomposition> {
    let WhitneyParams {
        gamma,
        dilation,
        max_depth,
    } = params;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("γ = {gamma} must be positive")));
    }
    if !(dilation > 1.0 && dilation.is_finite()) {
        return Err(Error::Parameter(format!("dilation a = {dilation} must exceed 1")));
    }
    if max_depth < 1 {
        return Err(Error::Parameter("max_depth must be at least 1".into()));
    }
    let mut boxes = Vec::new();
    let mut residual = Vec::new();
    let mut tree = HashMap::new();
    let mut frontier: Vec<DyadicBox> = (0..4).map(|j| DyadicBox::square(0, j)).collect();
    for depth in 0..=max_depth {
        let mut next = Vec::new();
        for sq in frontier {
            let (lower, raw) = distance(&sq.sector());
            if lower > gamma * sq.diameter() {
                tree.insert((sq.level, sq.index), Node::Box(boxes.len()));
                boxes.push(WhitneyBox {
                    region: sq,
                    support: sq,
                    kind: BoxKind::Good,
                    depth,
                    dist_to_boundary: raw,
                });
            } else if depth == max_depth {
                tree.insert((sq.level, sq.index), Node::Residual(residual.len()));
                residual.push(sq);
            } else {
                let upper = sq.upper_half();
                let (_, raw_upper) = distance(&upper.sector());
                tree.insert((sq.level, sq.index), Node::Split { upper: boxes.len() });
                boxes.push(WhitneyBox {
                    region: upper,
                    support: sq,
                    kind: BoxKind::UpperHalf,
                    depth,
                    dist_to_boundary: raw_upper,
                });
                next.extend(sq.lower_children());
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(WhitneyDecomposition {
        boxes,
        residual,
        gamma,
        delta,
        dilation,
        max_depth,
        tree,
    })
}

impl WhitneyDecomposition {
    /// Standard dyadic decomposition of the annulus: upper halves at levels
    /// `0..levels` and the squares of level `levels`.
    pub fn dyadic_grid(levels: u32) -> Self {
        let mut boxes = Vec::new();
        let mut tree = HashMap::new();
        let mut frontier: Vec<DyadicBox> = (0..4).map(|j| DyadicBox::square(0, j)).collect();
        for depth in 0..=levels {
            let mut next = Vec::new();
            for sq in frontier {
                if depth == levels {
                    tree.insert((sq.level, sq.index), Node::Box(boxes.len()));
                    boxes.push(WhitneyBox {
                        region: sq,
                        support: sq,
                        kind: BoxKind::Good,
                        depth,
                        dist_to_boundary: f64::NAN,
                    });
                } else {
                    tree.insert((sq.level, sq.index), Node::Split { upper: boxes.len() });
                    boxes.push(WhitneyBox {
                        region: sq.upper_half(),
                        support: sq,
                        kind: BoxKind::UpperHalf,
                        depth,
                        dist_to_boundary: f64::NAN,
                    });
                    next.extend(sq.lower_children());
                }
            }
            frontier = next;
        }
        WhitneyDecomposition {
            boxes,
            residual: Vec::new(),
            gamma: f64::NAN,
            delta: f64::NAN,
            dilation: 3.0,
            max_depth: levels,
            tree,
        }
    }

    /// Decomposition made of the given squares, each treated as a good box.
    /// Distances are measured against `dom`. No covering is implied.
    pub fn from_squares(dom: &LevelDomain, squares: &[DyadicBox], gamma: f64) -> Self {
        let mut boxes = Vec::new();
        let mut tree = HashMap::new();
        for sq in squares {
            let (_, raw) = box_distance(&sq.sector(), dom);
            tree.insert((sq.level, sq.index), Node::Box(boxes.len()));
            boxes.push(WhitneyBox {
                region: *sq,
                support: *sq,
                kind: BoxKind::Good,
                depth: sq.level,
                dist_to_boundary: raw,
            });
        }
        WhitneyDecomposition {
            boxes,
            residual: Vec::new(),
            gamma,
            delta: dom.delta(),
            dilation: 3.0,
            max_depth: squares.iter().map(|s| s.level).max().unwrap_or(0),
            tree,
        }
    }

    pub fn boxes(&self) -> &[WhitneyBox] {
        &self.boxes
    }

    pub fn residual(&self) -> &[DyadicBox] {
        &self.residual
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Identifies the box list; measures binned on a decomposition carry it.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.boxes.len().hash(&mut h);
        for b in &self.boxes {
            b.region.hash(&mut h);
            b.kind.hash(&mut h);
        }
        self.residual.hash(&mut h);
        h.finish()
    }

    /// Finds the member containing `z` by descending the subdivision tree.
    pub fn locate(&self, z: Complex64) -> Location {
        let r = z.norm();
        if r > 1.0 {
            return Location::Outside;
        }
        if r <= 0.5 {
            return Location::Core;
        }
        let t = angle_of(z);
        let mut level = 0;
        loop {
            let key = (level, cell_index(t, level));
            match self.tree.get(&key) {
                Some(Node::Box(i)) => return Location::Box(*i),
                Some(Node::Residual(i)) => return Location::Residual(*i),
                Some(Node::Split { upper }) => {
                    if r <= self.boxes[*upper].region.r_hi() {
                        return Location::Box(*upper);
                    }
                }
                None => {
                    // hand-built families need not form a tree
                    return self
                        .boxes
                        .iter()
                        .position(|b| b.region.contains(z))
                        .map_or(Location::Outside, Location::Box);
                }
            }
            level += 1;
        }
    }

    /// Total area of the emitted boxes and of the residual squares.
    pub fn covered_area(&self) -> (f64, f64) {
        let boxes = self.boxes.iter().map(|b| b.region.area()).sum();
        let residual = self.residual.iter().map(|s| s.area()).sum();
        (boxes, residual)
    }

    /// Writes `box_id, kind, depth, arc_center, arc_length, diam, dist_to_boundary`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            box_id: usize,
            kind: &'static str,
            depth: u32,
            arc_center: f64,
            arc_length: f64,
            diam: f64,
            dist_to_boundary: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, b) in self.boxes.iter().enumerate() {
            w.serialize(Row {
                box_id: i,
                kind: b.kind.label(),
                depth: b.depth,
                arc_center: b.region.arc_center(),
                arc_length: b.region.arc_length(),
                diam: b.diameter(),
                dist_to_boundary: b.dist_to_boundary,
            })?;
        }
        w.flush().map_err(|e| Error::io("csv stream", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Two-sided distance bounds, box by box: every upper half and every
    /// non-root good square obeys `dist(G, ∂D_δ) ≤ γ·d(W) + d(G)`
    /// (with `W` the parent square for good boxes), and every box keeps
    /// `dist(G, ∂D_δ) ≥ min(γ·d(G), h_W/2)` where `h_W` is the radial height of `W`.
    ///
    /// Returns the observed `m = min dist/d`, `M = max dist/d` and the list
    /// of violating box ids.
    pub fn distance_bounds(&self, dom: &LevelDomain) -> DistanceBounds {
        let slack = |d: f64| 1e-9 * d + 2.0 * dom.chord_error() + dom.resolution() * 1e-6;
        let mut m = f64::INFINITY;
        let mut big_m: f64 = 0.0;
        let mut violations = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            let d = b.diameter();
            let dist = b.dist_to_boundary;
            m = m.min(dist / d);
            big_m = big_m.max(dist / d);
            let cover = d / 24.0;
            let upper_ok = match b.kind {
                BoxKind::UpperHalf => dist <= self.gamma * b.support.diameter() + d + cover + slack(d),
                BoxKind::Good if b.depth == 0 => true,
                BoxKind::Good => {
                    let parent = DyadicBox::square(b.region.level - 1, b.region.index / 2);
                    dist <= self.gamma * parent.diameter() + parent.diameter() + cover + slack(d)
                }
            };
            let lower = match b.kind {
                BoxKind::Good => self.gamma * d,
                BoxKind::UpperHalf => {
                    0.5 * (b.support.r_hi() - b.support.r_lo()).min(self.gamma * d)
                }
            };
            let lower_ok = dist + cover + slack(d) >= lower;
            if !(upper_ok && lower_ok) {
                violations.push(i);
            }
        }
        DistanceBounds {
            m,
            big_m,
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBounds {
    pub m: f64,
    pub big_m: f64,
    pub violations: Vec<usize>,
}

/// Worst-case constants of the Whitney-type definition estimated on a
/// decomposition: (i) `dist(z₁)/dist(z₂) ≤ c` within each box, (ii)
/// `B(z, a·d) ⊂ G ⊂ B(z, b·d)` with `z` the polar center, `d = dist(z, ∂D_δ)`.
#[derive(Debug, Clone, Serialize)]
pub struct WhitneyReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub multiplicity: usize,
    pub boxes: usize,
    pub residual: usize,
    pub pass: bool,
    pub worst_box: Option<usize>,
}

pub fn validate_whitney(dec: &WhitneyDecomposition, dom: &LevelDomain, samples: usize) -> WhitneyReport {
    let n = samples.max(2);
    let mut a: f64 = f64::INFINITY;
    let mut b: f64 = 0.0;
    let mut c: f64 = 1.0;
    let mut worst = None;
    for (i, bx) in dec.boxes.iter().enumerate() {
        let s = bx.region.sector();
        let mut pts = s.interior_grid(n, n);
        let (edge, _) = s.boundary_samples(s.diameter() / n as f64);
        pts.extend(edge.iter().copied());
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &p in &pts {
            let d = dom.distance(p);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let ci = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if ci > c {
            c = ci;
            worst = Some(i);
        }
        let center = s.center();
        let dc = dom.distance(center);
        let far = edge.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
        a = a.min(s.inradius() / dc);
        b = b.max(if dc > 0.0 { far / dc } else { f64::INFINITY });
    }
    let multiplicity = overlap_multiplicity(dec, dec);
    let pass = a > 0.0 && a.is_finite() && b.is_finite() && c.is_finite() && multiplicity <= 1;
    WhitneyReport {
        a,
        b,
        c,
        multiplicity,
        boxes: dec.boxes.len(),
        residual: dec.residual.len(),
        pass,
        worst_box: worst,
    }
}

/// `max_i #{j : G_i ∩ F_j ≠ ∅}` for `G_i ∈ dec1`, `F_j ∈ dec2`.
pub fn overlap_multiplicity(dec1: &WhitneyDecomposition, dec2: &WhitneyDecomposition) -> usize {
    let mut by_level: HashMap<u32, Vec<(u64, DyadicBox)>> = HashMap::new();
    for b in &dec2.boxes {
        by_level.entry(b.region.level).or_default().push((b.region.index, b.region));
    }
    for v in by_level.values_mut() {
        v.sort_by_key(|e| e.0);
    }
    let mut best = 0;
    for g in &dec1.boxes {
        let g = g.region;
        let mut count = 0;
        for (&level, list) in &by_level {
            let (lo, hi) = if level >= g.level {
                let s = level - g.level;
                (g.index << s, (g.index + 1) << s)
            } else {
                let s = g.level - level;
                (g.index >> s, (g.index >> s) + 1)
            };
            let start = list.partition_point(|e| e.0 < lo);
            count += list[start..]
                .iter()
                .take_while(|e| e.0 < hi)
                .filter(|e| g.intersects(&e.1))
                .count();
        }
        best = best.max(count);
    }
    best
}

/// Length of the part of the segment `[p, q]` inside the open disk `B(z, r)`.
fn segment_length_in_ball(p: Complex64, q: Complex64, z: Complex64, r: f64) -> f64 {
    let d = q - p;
    let a = d.norm_sqr();
    if a == 0.0 {
        return 0.0;
    }
    let f = p - z;
    let b = (f * d.conj()).re;
    let c = f.norm_sqr() - r * r;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-b - sq) / a).max(0.0);
    let t1 = ((-b + sq) / a).min(1.0);
    if t1 > t0 {
        (t1 - t0) * a.sqrt()
    } else {
        0.0
    }
}

/// `sup H¹(Γ ∩ B(z, r))/r` over `centers` points evenly spaced along the
/// closed polyline and `radii` log-spaced radii from the longest segment to
/// twice the diameter, plus the radius reaching the farthest vertex.
pub fn ahlfors_ratio(curve: &[Complex64], closed: bool, centers: usize, radii: usize) -> f64 {
    let n = curve.len();
    if n < 2 {
        return 0.0;
    }
    let segs: Vec<(Complex64, Complex64)> = if closed {
        (0..n).map(|i| (curve[i], curve[(i + 1) % n])).collect()
    } else {
        curve.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let longest = segs.iter().map(|(a, b)| (b - a).norm()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (curve[0], curve[0]);
    for p in curve {
        lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    let diam = (hi - lo).norm();
    let r_min = (4.0 * longest).max(1e-12);
    let r_max = 2.0 * diam;
    let count = centers.max(1).min(n);
    let mut best: f64 = 0.0;
    for k in 0..count {
        let z = curve[k * n / count];
        let farthest = curve.iter().map(|p| (p - z).norm()).fold(0.0, f64::max);
        let mut rs: Vec<f64> = (0..radii.max(2))
            .map(|j| r_min * (r_max / r_min).powf(j as f64 / (radii.max(2) - 1) as f64))
            .collect();
        rs.push(farthest);
        for r in rs {
            let len: f64 = segs
                .iter()
                .filter(|(a, b)| segment_distance(*a, *b, z) < r)
                .map(|(a, b)| segment_length_in_ball(*a, *b, z, r))
                .sum();
            best = best.max(len / r);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::InnerFunction;
    use crate::level::level_boundary;

    fn identity_domain(delta: f64) -> LevelDomain {
        level_boundary(&InnerFunction::power(1).unwrap(), delta, 1e-3).unwrap()
    }

    #[test]
    fn quadrant_geometry() {
        let q = DyadicBox::square(0, 1);
        assert!((q.diameter() - 2f64.sqrt()).abs() < 1e-15);
        assert!((q.area() - 3.0 * PI / 16.0).abs() < 1e-15);
        assert!(q.contains(Complex64::new(-0.1, 0.8)));
        assert!(!q.contains(Complex64::new(0.1, 0.8)));
        let u = q.upper_half();
        assert_eq!((u.r_lo(), u.r_hi()), (0.5, 0.75));
        let [c0, c1] = q.lower_children();
        assert!((c0.area() + c1.area() + u.area() - q.area()).abs() < 1e-15);
    }

    #[test]
    fn sector_diameter_matches_sampling() {
        for (r_lo, r_hi, w) in [(0.5, 1.0, 0.3), (0.9, 0.95, 2.0), (0.1, 1.0, 4.0), (0.99, 1.0, 0.001)] {
            let s = Sector {
                r_lo,
                r_hi,
                t_lo: 0.2,
                width: w,
            };
            let (pts, _) = s.boundary_samples(1e-3);
            let mut best: f64 = 0.0;
            for p in &pts {
                for q in &pts {
                    best = best.max((p - q).norm());
                }
            }
            assert!((best - s.diameter()).abs() < 1e-6, "{best} vs {}", s.diameter());
        }
    }

    #[test]
    fn far_circle_gives_four_good_quadrants() {
        let dom = identity_domain(2.0);
        let dec = build_whitney(&dom, WhitneyParams::default()).unwrap();
        assert_eq!(dec.boxes().len(), 4);
        assert!(dec.boxes().iter().all(|b| b.kind == BoxKind::Good));
        assert!(dec.residual().is_empty());
        let report = validate_whitney(&dec, &dom, 8);
        assert!(report.pass);
        assert!(report.c <= 2.0, "{}", report.c);
    }

    #[test]
    fn near_circle_subdivides_to_the_cap() {
        let dom = identity_domain(1.0001);
        let params = WhitneyParams {
            gamma: 1.0,
            max_depth: 8,
            ..Default::default()
        };
        let dec = build_whitney(&dom, params).unwrap();
        // dist ≈ 1e-4 is below γ·d for every square down to depth 8
        assert_eq!(dec.residual().len(), 4 << 8);
        for depth in 0..8 {
            let halves = dec.boxes().iter().filter(|b| b.depth == depth).count();
            assert_eq!(halves, 4 << depth);
        }
        let (boxes, residual) = dec.covered_area();
        assert!((boxes + residual - 0.75 * PI).abs() < 1e-12);
    }

    #[test]
    fn paley_wiener_refines_only_near_one() {
        let pw = InnerFunction::paley_wiener();
        let dom = level_boundary(&pw, 0.5f64.exp(), 1e-3).unwrap();
        let dec = build_whitney(
            &dom,
            WhitneyParams {
                max_depth: 12,
                ..Default::default()
            },
        )
        .unwrap();
        for b in dec.boxes() {
            if b.depth >= 6 {
                let c = Complex64::from_polar(1.0, b.region.arc_center());
                assert!((c - 1.0).norm() < 0.5, "deep box far from 1 at {}", b.region.arc_center());
            }
        }
        assert!(dec.residual().iter().all(|s| {
            let c = Complex64::from_polar(1.0, s.arc_center());
            (c - 1.0).norm() < 0.05
        }));
        let report = validate_whitney(&dec, &dom, 6);
        assert!(report.pass, "{report:?}");
        let bounds = dec.distance_bounds(&dom);
        assert!(bounds.violations.is_empty(), "{bounds:?}");
        assert!(bounds.m > 0.0 && bounds.big_m.is_finite());
    }

    #[test]
    fn touching_box_fails_validation() {
        let pw = InnerFunction::paley_wiener();
        let dom = level_boundary(&pw, 0.5f64.exp(), 1e-3).unwrap();
        let dec = WhitneyDecomposition::from_squares(&dom, &[DyadicBox::square(3, 0)], 0.5);
        let report = validate_whitney(&dec, &dom, 6);
        assert!(!report.pass);
        assert!(report.c.is_infinite());
    }

    #[test]
    fn multiplicity_examples() {
        let dom = identity_domain(2.0);
        let four = build_whitney(&dom, WhitneyParams::default()).unwrap();
        assert_eq!(overlap_multiplicity(&four, &four), 1);
        let refined = WhitneyDecomposition::dyadic_grid(2);
        // per quadrant: upper halves at depths 0 and 1 (1 + 2) and 4 squares at depth 2
        assert_eq!(overlap_multiplicity(&four, &refined), 7);
        let a = WhitneyDecomposition::from_squares(&dom, &[DyadicBox::square(1, 0)], 0.5);
        let b = WhitneyDecomposition::from_squares(&dom, &[DyadicBox::square(1, 5)], 0.5);
        assert_eq!(overlap_multiplicity(&a, &b), 0);
    }

    #[test]
    fn locate_agrees_with_membership() {
        let pw = InnerFunction::paley_wiener();
        let dom = level_boundary(&pw, 0.5f64.exp(), 1e-3).unwrap();
        let dec = build_whitney(
            &dom,
            WhitneyParams {
                max_depth: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let mut rng = crate::rng::Lcg::new(7);
        for _ in 0..2000 {
            let z = rng.in_disk(1.0);
            match dec.locate(z) {
                Location::Box(i) => assert!(dec.boxes()[i].region.contains(z)),
                Location::Residual(i) => assert!(dec.residual()[i].contains(z)),
                Location::Core => assert!(z.norm() <= 0.5),
                Location::Outside => panic!("{z} not located"),
            }
        }
    }

    #[test]
    fn ahlfors_examples() {
        let circle: Vec<Complex64> = (0..4000)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / 4000.0))
            .collect();
        let r = ahlfors_ratio(&circle, true, 64, 24);
        assert!(r <= PI + 1e-9 && r > PI - 1e-3, "{r}");
        let seg = vec![Complex64::new(0.0, 0.0), Complex64::new(3.0, 1.0)];
        assert!(ahlfors_ratio(&seg, false, 2, 16) <= 2.0 + 1e-12);
        let big: Vec<Complex64> = circle.iter().map(|z| z * 2.0 - 1.0).collect();
        let rb = ahlfors_ratio(&big, true, 64, 24);
        assert!((rb - r).abs() < 1e-9);
    }

    #[test]
    fn csv_has_expected_header() {
        let dom = identity_domain(2.0);
        let dec = build_whitney(&dom, WhitneyParams::default()).unwrap();
        let mut buf = Vec::new();
        dec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("box_id,kind,depth,arc_center,arc_length,diam,dist_to_boundary\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
