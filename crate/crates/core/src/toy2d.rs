//! Planar replica of the pipeline: 5-point screened Poisson solve, marching
//! squares, segment-length-weighted normal update. Small enough to run many
//! seeds in a test.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cg::{conjugate_residual, LinearOperator};
use crate::error::{invalid, Error, Result};
use crate::geometry::UnionFind;
use crate::orient::{top_fraction_mean, DEFAULT_K, MIN_WEIGHTED_NORM};
use crate::pipeline::{COLLAPSE_LIMIT, DEFAULT_DELTA, DEFAULT_MAX_ITERS};
use crate::poisson::{DEFAULT_ALPHA, DEFAULT_TOL, SCREEN_TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn try_normalize(self, min_norm: f64) -> Option<Vec2> {
        let n = self.norm();
        (n > min_norm && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Rotated a quarter turn counter-clockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Planar test shapes in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape2d {
    Ellipse { center: Vec2, a: f64, b: f64 },
    Circle { center: Vec2, radius: f64 },
    TwoCircles { left: Vec2, right: Vec2, radius: f64 },
}

impl Shape2d {
    pub const ELLIPSE: Shape2d = Shape2d::Ellipse { center: Vec2::new(0.5, 0.5), a: 0.3, b: 0.18 };
    pub const CIRCLE: Shape2d = Shape2d::Circle { center: Vec2::new(0.5, 0.5), radius: 0.3 };
    pub const TWO_CIRCLES: Shape2d =
        Shape2d::TwoCircles { left: Vec2::new(0.3, 0.5), right: Vec2::new(0.72, 0.5), radius: 0.15 };

    pub fn from_name(name: &str) -> Option<Shape2d> {
        match name {
            "ellipse" => Some(Self::ELLIPSE),
            "circle" => Some(Self::CIRCLE),
            "two-circles" => Some(Self::TWO_CIRCLES),
            _ => None,
        }
    }

    /// `n` points evenly spaced in the curve parameter.
    pub fn sample(&self, n: usize) -> Vec<Vec2> {
        let at = |c: Vec2, a: f64, b: f64, t: f64| c + Vec2::new(a * t.cos(), b * t.sin());
        let angle = |i: usize, m: usize| std::f64::consts::TAU * i as f64 / m as f64;
        match *self {
            Shape2d::Ellipse { center, a, b } => (0..n).map(|i| at(center, a, b, angle(i, n))).collect(),
            Shape2d::Circle { center, radius } => (0..n).map(|i| at(center, radius, radius, angle(i, n))).collect(),
            Shape2d::TwoCircles { left, right, radius } => {
                let half = n / 2;
                (0..half)
                    .map(|i| at(left, radius, radius, angle(i, half)))
                    .chain((0..n - half).map(|i| at(right, radius, radius, angle(i, n - half))))
                    .collect()
            }
        }
    }

    pub fn inward_normal(&self, p: Vec2) -> Vec2 {
        let g = match *self {
            Shape2d::Ellipse { center, a, b } => {
                let q = p - center;
                -Vec2::new(q.x / (a * a), q.y / (b * b))
            }
            Shape2d::Circle { center, .. } => center - p,
            Shape2d::TwoCircles { left, right, .. } => {
                if (p - left).norm() <= (p - right).norm() {
                    left - p
                } else {
                    right - p
                }
            }
        };
        g.try_normalize(0.0).unwrap_or(Vec2::new(1.0, 0.0))
    }
}

pub type NormalFn2d = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

#[derive(Clone)]
pub enum Init2d {
    Random { seed: u64 },
    /// Evaluated at world-space sample positions.
    Given(NormalFn2d),
}

#[derive(Clone)]
pub struct Toy2dConfig {
    pub depth: u32,
    pub alpha: f64,
    pub delta: f64,
    pub k: usize,
    pub max_iters: usize,
    pub init: Init2d,
    pub padding: f64,
    pub tol: f64,
    /// Writes `iter_<N>.svg` per iteration when set.
    pub svg_dir: Option<PathBuf>,
}

impl Default for Toy2dConfig {
    fn default() -> Self {
        Self {
            depth: 7,
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            k: DEFAULT_K,
            max_iters: DEFAULT_MAX_ITERS,
            init: Init2d::Random { seed: 0 },
            padding: 0.15,
            tol: DEFAULT_TOL,
            svg_dir: None,
        }
    }
}

impl Toy2dConfig {
    fn validate(&self) -> Result<()> {
        if !(2..=12).contains(&self.depth) {
            return Err(invalid("depth", format!("must be in 2..=12, got {}", self.depth)));
        }
        if !(self.delta > 0.0) {
            return Err(invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(1..=1000).contains(&self.max_iters) {
            return Err(invalid("max_iters", format!("must be in 1..=1000, got {}", self.max_iters)));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be >= 1"));
        }
        if !(self.alpha >= 0.0) || !(self.padding > 0.0 && self.padding < 0.5) {
            return Err(invalid("alpha/padding", "out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report2d {
    pub iter: usize,
    pub d: Option<f64>,
    pub segments: usize,
    pub loops: usize,
    pub iso: f64,
}

#[derive(Debug, Clone)]
pub struct Output2d {
    /// Closed polylines in world coordinates, first point not repeated.
    pub loops: Vec<Vec<Vec2>>,
    /// World-space sample positions.
    pub positions: Vec<Vec2>,
    /// Sample normals at initialization and after each iteration.
    pub normal_history: Vec<Vec<Vec2>>,
    pub reports: Vec<Report2d>,
    pub converged: bool,
}

impl Output2d {
    pub fn normals(&self) -> &[Vec2] {
        self.normal_history.last().unwrap()
    }

    /// Fraction of inward normals at each recorded step against `truth`.
    pub fn inward_history(&self, truth: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        self.normal_history.iter().map(|n| inward_fraction_2d(&self.positions, n, &truth)).collect()
    }
}

pub fn inward_fraction_2d(positions: &[Vec2], normals: &[Vec2], truth: impl Fn(Vec2) -> Vec2) -> f64 {
    let hits = positions.iter().zip(normals).filter(|(&p, n)| n.dot(truth(p)) > 0.0).count();
    hits as f64 / positions.len().max(1) as f64
}

#[derive(Debug, Clone, Copy)]
struct Transform2d {
    scale: f64,
    offset: Vec2,
}

impl Transform2d {
    fn to_domain(self, p: Vec2) -> Vec2 {
        p * self.scale + self.offset
    }

    fn to_world(self, q: Vec2) -> Vec2 {
        (q - self.offset) * (1.0 / self.scale)
    }
}

/// Node-valued field on a `(R+1)^2` grid over the unit square.
#[derive(Debug, Clone)]
struct Grid2 {
    resolution: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Bilinear {
    base: usize,
    weights: [f64; 4],
    offsets: [usize; 4],
}

impl Bilinear {
    fn new(p: Vec2, resolution: usize) -> Self {
        let r = resolution as f64;
        let split = |v: f64| {
            let t = v * r;
            let c = (t.floor().max(0.0) as usize).min(resolution - 1);
            (c, t - c as f64)
        };
        let (i, fx) = split(p.x);
        let (j, fy) = split(p.y);
        let n1 = resolution + 1;
        Self {
            base: j * n1 + i,
            weights: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
            offsets: [0, 1, n1, n1 + 1],
        }
    }

    fn eval(&self, v: &[f64]) -> f64 {
        (0..4).map(|c| self.weights[c] * v[self.base + self.offsets[c]]).sum()
    }
}

fn on_boundary(idx: usize, resolution: usize) -> bool {
    let n1 = resolution + 1;
    let (i, j) = (idx % n1, idx / n1);
    i == 0 || j == 0 || i == resolution || j == resolution
}

/// `L + (alpha / n) P^T P` on interior nodes.
struct Operator2d {
    resolution: usize,
    stencils: Vec<Bilinear>,
    screen: f64,
}

impl LinearOperator for Operator2d {
    fn dim(&self) -> usize {
        (self.resolution + 1) * (self.resolution + 1)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = self.resolution;
        let n1 = r + 1;
        y.fill(0.0);
        for j in 1..r {
            for i in 1..r {
                let c = j * n1 + i;
                y[c] = 4.0 * x[c] - x[c - 1] - x[c + 1] - x[c - n1] - x[c + n1];
            }
        }
        for s in &self.stencils {
            let t = s.eval(x) * self.screen;
            for c in 0..4 {
                y[s.base + s.offsets[c]] += t * s.weights[c];
            }
        }
    }
}

fn solve_2d(positions: &[Vec2], normals: &[Vec2], resolution: usize, alpha: f64, tol: f64, warm: Option<&Grid2>) -> Result<Grid2> {
    let n1 = resolution + 1;
    let h = 1.0 / resolution as f64;
    // splat, one 1-2-1 pass per axis
    let mut v = [vec![0.0; n1 * n1], vec![0.0; n1 * n1]];
    for (&p, &n) in positions.iter().zip(normals) {
        let s = Bilinear::new(p, resolution);
        for c in 0..4 {
            v[0][s.base + s.offsets[c]] += s.weights[c] * n.x;
            v[1][s.base + s.offsets[c]] += s.weights[c] * n.y;
        }
    }
    for comp in v.iter_mut() {
        for stride in [1, n1] {
            let src = comp.clone();
            comp.fill(0.0);
            for (idx, &val) in src.iter().enumerate() {
                let pos = (idx / stride) % n1;
                comp[idx] += 0.5 * val;
                comp[if pos > 0 { idx - stride } else { idx }] += 0.25 * val;
                comp[if pos < resolution { idx + stride } else { idx }] += 0.25 * val;
            }
        }
    }
    // density = mass * h / h^2; edge term carries h
    let mut b = vec![0.0; n1 * n1];
    for (axis, stride) in [1, n1].into_iter().enumerate() {
        for a in 0..b.len() {
            if (a / stride) % n1 == resolution {
                continue;
            }
            let e = 0.5 * (v[axis][a] + v[axis][a + stride]) * h / h;
            b[a] -= e;
            b[a + stride] += e;
        }
    }
    let screen = alpha / positions.len() as f64;
    let mut stencils: Vec<Bilinear> = positions.iter().map(|&p| Bilinear::new(p, resolution)).collect();
    for s in &mut stencils {
        for c in 0..4 {
            if on_boundary(s.base + s.offsets[c], resolution) {
                s.weights[c] = 0.0;
            }
        }
        for c in 0..4 {
            b[s.base + s.offsets[c]] += screen * SCREEN_TARGET * s.weights[c];
        }
    }
    for (idx, bi) in b.iter_mut().enumerate() {
        if on_boundary(idx, resolution) {
            *bi = 0.0;
        }
    }
    let op = Operator2d { resolution, stencils, screen };
    let mut x = warm.map(|g| g.values.clone()).unwrap_or_else(|| vec![0.0; n1 * n1]);
    conjugate_residual(&op, &b, &mut x, tol, 20 * resolution)?;
    Ok(Grid2 { resolution, values: x })
}

/// Oriented segments of the level set, each with its normal pointing toward
/// increasing values. Vertices are shared between neighbouring cells.
struct Contour {
    vertices: Vec<Vec2>,
    segments: Vec<[u32; 2]>,
}

impl Contour {
    fn normal(&self, s: usize) -> (f64, Option<Vec2>) {
        let [a, b] = self.segments[s].map(|i| self.vertices[i as usize]);
        let d = b - a;
        (d.norm(), d.perp().try_normalize(1e-14 * (a.norm() + b.norm() + 1.0)))
    }

    fn midpoint(&self, s: usize) -> Vec2 {
        let [a, b] = self.segments[s].map(|i| self.vertices[i as usize]);
        (a + b) * 0.5
    }

    /// Groups segments into closed loops, returned as vertex sequences.
    fn loops(&self) -> Vec<Vec<Vec2>> {
        let mut next: HashMap<u32, u32> = HashMap::new();
        for s in &self.segments {
            next.insert(s[0], s[1]);
        }
        let mut starts: Vec<u32> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut seen = vec![false; self.vertices.len()];
        let mut out = Vec::new();
        for s in starts {
            if seen[s as usize] {
                continue;
            }
            let mut ring = Vec::new();
            let mut v = s;
            while !seen[v as usize] {
                seen[v as usize] = true;
                ring.push(self.vertices[v as usize]);
                match next.get(&v) {
                    Some(&w) => v = w,
                    None => break,
                }
            }
            out.push(ring);
        }
        out
    }

    fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for s in &self.segments {
            uf.union(s[0] as usize, s[1] as usize);
        }
        let used: std::collections::HashSet<usize> =
            self.segments.iter().flatten().map(|&v| uf.find(v as usize)).collect();
        used.len()
    }
}

/// Marching squares. Inside means value > iso; diagonal (saddle) cells keep
/// the inside corners apart.
fn marching_squares(field: &Grid2, iso: f64) -> Contour {
    let r = field.resolution;
    let n1 = r + 1;
    let val = |i: usize, j: usize| field.values[j * n1 + i];
    let mut ids: HashMap<(usize, u8), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut segments = Vec::new();
    // corners counter-clockwise, edge e joins corner e and e+1
    const CORNER: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];
    for j in 0..r {
        for i in 0..r {
            let v: [f64; 4] = CORNER.map(|(di, dj)| val(i + di, j + dj));
            let inside = v.map(|x| x > iso);
            if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                continue;
            }
            let mut vertex = |e: usize| -> u32 {
                let (a, b) = (CORNER[e], CORNER[(e + 1) % 4]);
                // key on the lower endpoint and axis
                let (lo, hi) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
                let axis = if lo.1 == hi.1 { 0 } else { 1 };
                let key = ((j + lo.1) * n1 + i + lo.0, axis);
                *ids.entry(key).or_insert_with(|| {
                    let (va, vb) = (v[e], v[(e + 1) % 4]);
                    let t = (iso - va) / (vb - va);
                    let pa = Vec2::new((i + a.0) as f64, (j + a.1) as f64);
                    let pb = Vec2::new((i + b.0) as f64, (j + b.1) as f64);
                    vertices.push((pa + (pb - pa) * t) * (1.0 / r as f64));
                    (vertices.len() - 1) as u32
                })
            };
            // pair each out->in crossing with the next in->out crossing
            for e in 0..4 {
                if !inside[e] && inside[(e + 1) % 4] {
                    let mut f = (e + 1) % 4;
                    while inside[(f + 1) % 4] {
                        f = (f + 1) % 4;
                    }
                    // segment runs from the exit crossing to the entry crossing
                    // so its left normal faces the inside corners
                    let (a, b) = (vertex(f), vertex(e));
                    segments.push([a, b]);
                }
            }
        }
    }
    Contour { vertices, segments }
}

fn knn_brute(positions: &[Vec2], q: Vec2, k: usize, out: &mut Vec<(f64, usize)>) {
    out.clear();
    out.extend(positions.iter().enumerate().map(|(i, &p)| ((p - q).dot(p - q), i)));
    let k = k.min(out.len());
    if k < out.len() {
        out.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(k);
    }
}

fn update_2d(positions: &[Vec2], normals: &[Vec2], contour: &Contour, k: usize) -> Vec<Vec2> {
    let mut sums = vec![Vec2::ZERO; positions.len()];
    let mut nn = Vec::new();
    for s in 0..contour.segments.len() {
        let (len, n) = contour.normal(s);
        let Some(n) = n else { continue };
        knn_brute(positions, contour.midpoint(s), k, &mut nn);
        for &(_, i) in &nn {
            sums[i] = sums[i] + n * len;
        }
    }
    sums.iter()
        .zip(normals)
        .map(|(s, &prev)| s.try_normalize(MIN_WEIGHTED_NORM).unwrap_or(prev))
        .collect()
}

fn bin_points_2d(points: &[Vec2], resolution: usize) -> Vec<Vec2> {
    let mut cells: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = |v: f64| ((v * resolution as f64).floor() as u64).min(resolution as u64 - 1);
            (c(p.y) * resolution as u64 + c(p.x), i)
        })
        .collect();
    cells.sort_unstable();
    cells
        .chunk_by(|a, b| a.0 == b.0)
        .map(|run| {
            let sum = run.iter().fold(Vec2::ZERO, |acc, &(_, i)| acc + points[i]);
            sum * (1.0 / run.len() as f64)
        })
        .collect()
}

fn random_normals_2d(n: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let v = Vec2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            if let Some(u) = v.try_normalize(1e-12) {
                break u;
            }
        })
        .collect()
}

pub fn run_ipsr_2d(points: &[Vec2], config: &Toy2dConfig) -> Result<Output2d> {
    config.validate()?;
    if points.len() < 3 {
        return Err(invalid("points", format!("need at least 3, got {}", points.len())));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let longest = (hi.x - lo.x).max(hi.y - lo.y);
    if longest <= 0.0 {
        return Err(Error::DegenerateExtent);
    }
    let scale = (1.0 - 2.0 * config.padding) / longest;
    let t = Transform2d { scale, offset: Vec2::new(0.5, 0.5) - (lo + hi) * (0.5 * scale) };
    let resolution = 1usize << config.depth;
    let domain: Vec<Vec2> = points.iter().map(|&p| t.to_domain(p)).collect();
    let positions = bin_points_2d(&domain, resolution);
    let world: Vec<Vec2> = positions.iter().map(|&p| t.to_world(p)).collect();

    let mut normals = match &config.init {
        Init2d::Random { seed } => random_normals_2d(positions.len(), *seed),
        Init2d::Given(f) => world.iter().map(|&p| f(p).try_normalize(0.0).unwrap_or(Vec2::ZERO)).collect(),
    };
    let mut history = vec![normals.clone()];
    let mut reports = Vec::new();
    let mut field = None;
    let mut empty_streak = 0;
    let mut converged = false;
    if let Some(dir) = &config.svg_dir {
        fs::create_dir_all(dir)?;
    }
    for iter in 1..=config.max_iters {
        let chi = solve_2d(&positions, &normals, resolution, config.alpha, config.tol, field.as_ref())?;
        let iso = positions.iter().map(|&p| Bilinear::new(p, resolution).eval(&chi.values)).sum::<f64>()
            / positions.len() as f64;
        let contour = marching_squares(&chi, iso);
        field = Some(chi);
        let mut report = Report2d { iter, d: None, segments: contour.segments.len(), loops: 0, iso };
        if contour.segments.is_empty() {
            empty_streak += 1;
            if empty_streak >= COLLAPSE_LIMIT {
                return Err(Error::FieldCollapsed { consecutive: empty_streak, iteration: iter, iso });
            }
        } else {
            empty_streak = 0;
            report.loops = contour.component_count();
            let updated = update_2d(&positions, &normals, &contour, config.k);
            let changes: Vec<f64> = updated.iter().zip(&normals).map(|(&a, &b)| (a - b).norm()).collect();
            report.d = Some(top_fraction_mean(&changes));
            normals = updated;
        }
        if let Some(dir) = &config.svg_dir {
            let loops: Vec<Vec<Vec2>> =
                contour.loops().into_iter().map(|l| l.into_iter().map(|p| t.to_world(p)).collect()).collect();
            fs::write(dir.join(format!("iter_{iter}.svg")), svg(&loops, &world, &normals, 0.02 / scale))?;
        }
        history.push(normals.clone());
        let stop = iter > 1 && report.d.is_some_and(|d| d < config.delta);
        reports.push(report);
        if stop {
            converged = true;
            break;
        }
    }

    let chi = solve_2d(&positions, &normals, resolution, config.alpha, config.tol, field.as_ref())?;
    let iso = positions.iter().map(|&p| Bilinear::new(p, resolution).eval(&chi.values)).sum::<f64>()
        / positions.len() as f64;
    let contour = marching_squares(&chi, iso);
    let loops = contour.loops().into_iter().map(|l| l.into_iter().map(|p| t.to_world(p)).collect()).collect();
    Ok(Output2d { loops, positions: world, normal_history: history, reports, converged })
}

/// Loops as polygons and each sample's normal as a short line.
pub fn svg(loops: &[Vec<Vec2>], positions: &[Vec2], normals: &[Vec2], glyph: f64) -> String {
    let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
    for p in loops.iter().flatten().chain(positions) {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = glyph * 2.0;
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let mut s = String::new();
    // y flipped so the picture matches the usual axes
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {w} {h}" width="600" height="{}">"#,
        lo.x - pad,
        -hi.y - pad,
        (600.0 * h / w).round()
    );
    let stroke = w / 400.0;
    for l in loops {
        let pts: Vec<String> = l.iter().map(|p| format!("{},{}", p.x, -p.y)).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="none" stroke="black" stroke-width="{stroke}"/>"#, pts.join(" "));
    }
    for (p, n) in positions.iter().zip(normals) {
        let q = *p + *n * glyph;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="red" stroke-width="{}"/>"#,
            p.x, -p.y, q.x, -q.y, stroke * 0.6
        );
    }
    s.push_str("</svg>\n");
    s
}
