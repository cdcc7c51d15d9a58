//! Screened Poisson solve for the indicator function on a regular node grid.
//!
//! The unit cube is discretized with `R` cells per axis and the indicator is
//! stored at the `(R + 1)^3` nodes, with the outer layer pinned to zero. The
//! discrete energy is
//!
//! ```text
//! E(chi) = sum_edges ((chi_b - chi_a) / h - V_e)^2 h^3 + (alpha / n) sum_i (chi(s_i) - 1/2)^2
//! ```
//!
//! where `V_e` is the edge-aligned component of the smoothed normal field and
//! `chi(s_i)` is trilinear interpolation at sample `i`. Its normal equations
//! are a 7-point Laplacian plus a sparse screening term, solved matrix-free by
//! the conjugate residual variant of conjugate gradient.

use rayon::prelude::*;

use crate::cg::{conjugate_residual, LinearOperator, SolveStats};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::sampling::SampleSet;

pub const DEFAULT_ALPHA: f64 = 10.0;
pub const DEFAULT_TOL: f64 = 1e-7;
/// The screened solution equals this value at samples when fitting is exact.
pub const SCREEN_TARGET: f64 = 0.5;

/// Scalar values on the `(R + 1)^3` grid nodes of the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    resolution: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(resolution: usize) -> Self {
        let n1 = resolution + 1;
        Self { resolution, values: vec![0.0; n1 * n1 * n1] }
    }

    /// Samples `f` at every node; boundary nodes are left at zero.
    pub fn from_fn(resolution: usize, f: impl Fn(Point3) -> f64 + Sync) -> Self {
        let mut g = Self::zeros(resolution);
        let n1 = resolution + 1;
        let h = 1.0 / resolution as f64;
        g.values.par_chunks_mut(n1 * n1).enumerate().for_each(|(k, slab)| {
            if k == 0 || k == resolution {
                return;
            }
            for j in 1..resolution {
                for i in 1..resolution {
                    slab[j * n1 + i] = f(Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h));
                }
            }
        });
        g
    }

    /// Like [`GridField::from_fn`] but also fills the boundary layer. The result
    /// is not a valid Dirichlet solution; it exists for extraction tests.
    pub fn from_fn_unpinned(resolution: usize, f: impl Fn(Point3) -> f64 + Sync) -> Self {
        let n1 = resolution + 1;
        let h = 1.0 / resolution as f64;
        let values = (0..n1 * n1 * n1)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % n1, (idx / n1) % n1, idx / (n1 * n1));
                f(Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h))
            })
            .collect();
        Self { resolution, values }
    }

    pub fn from_values(resolution: usize, values: Vec<f64>) -> Result<Self> {
        let n1 = resolution + 1;
        if values.len() != n1 * n1 * n1 {
            return Err(Error::CountMismatch { left: n1 * n1 * n1, right: values.len() });
        }
        Ok(Self { resolution, values })
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n1 = self.resolution + 1;
        (k * n1 + j) * n1 + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Point3 {
        Vec3::new(i as f64, j as f64, k as f64) * self.spacing()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Trilinear interpolation of the node values at `p`.
    pub fn eval_trilinear(&self, p: Point3) -> Result<f64> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(p.x) && in_unit(p.y) && in_unit(p.z)) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y, z: p.z });
        }
        let s = TrilinearStencil::new(p, self.resolution);
        Ok(s.eval(&self.values))
    }
}

/// Base node and the eight trilinear weights of a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrilinearStencil {
    pub base: usize,
    pub weights: [f64; 8],
    pub offsets: [usize; 8],
}

impl TrilinearStencil {
    pub fn new(p: Point3, resolution: usize) -> Self {
        let r = resolution as f64;
        let split = |v: f64| {
            let t = v * r;
            let c = (t.floor().max(0.0) as usize).min(resolution - 1);
            (c, t - c as f64)
        };
        let (i, fx) = split(p.x);
        let (j, fy) = split(p.y);
        let (k, fz) = split(p.z);
        let n1 = resolution + 1;
        let mut weights = [0.0; 8];
        let mut offsets = [0; 8];
        for c in 0..8 {
            let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let wx = if dx == 1 { fx } else { 1.0 - fx };
            let wy = if dy == 1 { fy } else { 1.0 - fy };
            let wz = if dz == 1 { fz } else { 1.0 - fz };
            weights[c] = wx * wy * wz;
            offsets[c] = (dz * n1 + dy) * n1 + dx;
        }
        Self { base: (k * n1 + j) * n1 + i, weights, offsets }
    }

    #[inline]
    pub fn eval(&self, values: &[f64]) -> f64 {
        (0..8).map(|c| self.weights[c] * values[self.base + self.offsets[c]]).sum()
    }
}

/// Three scalar node arrays, one per vector component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    resolution: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl GridVectorField {
    pub fn zeros(resolution: usize) -> Self {
        let n1 = resolution + 1;
        let len = n1 * n1 * n1;
        Self { resolution, x: vec![0.0; len], y: vec![0.0; len], z: vec![0.0; len] }
    }

    pub fn from_fn(resolution: usize, f: impl Fn(Point3) -> Vec3) -> Self {
        let mut v = Self::zeros(resolution);
        let n1 = resolution + 1;
        let h = 1.0 / resolution as f64;
        for idx in 0..n1 * n1 * n1 {
            let (i, j, k) = (idx % n1, (idx / n1) % n1, idx / (n1 * n1));
            let val = f(Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            v.x[idx] = val.x;
            v.y[idx] = val.y;
            v.z[idx] = val.z;
        }
        v
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        match axis {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }

    /// Componentwise sum over all nodes.
    pub fn total(&self) -> Vec3 {
        Vec3::new(self.x.iter().sum(), self.y.iter().sum(), self.z.iter().sum())
    }
}

/// Distributes each sample normal onto its 8 surrounding nodes with trilinear
/// weights. Zero normals contribute nothing.
pub fn splat_trilinear(samples: &SampleSet, resolution: usize) -> GridVectorField {
    let mut v = GridVectorField::zeros(resolution);
    for (&p, &n) in samples.positions().iter().zip(samples.normals()) {
        if n == Vec3::ZERO {
            continue;
        }
        let s = TrilinearStencil::new(p, resolution);
        for c in 0..8 {
            let idx = s.base + s.offsets[c];
            let w = s.weights[c];
            v.x[idx] += w * n.x;
            v.y[idx] += w * n.y;
            v.z[idx] += w * n.z;
        }
    }
    v
}

/// One pass of the separable 1-2-1 binomial filter along every axis. Mass
/// that would leave the grid stays at the boundary node, so sums are preserved.
pub fn smooth_binomial(field: &mut GridVectorField) {
    let r = field.resolution;
    for comp in [&mut field.x, &mut field.y, &mut field.z] {
        for axis in 0..3 {
            smooth_axis(comp, r, axis);
        }
    }
}

fn smooth_axis(values: &mut [f64], resolution: usize, axis: usize) {
    let n1 = resolution + 1;
    let stride = [1, n1, n1 * n1][axis];
    let src = values.to_vec();
    values.fill(0.0);
    for (idx, &v) in src.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let pos = (idx / stride) % n1;
        values[idx] += 0.5 * v;
        if pos > 0 {
            values[idx - stride] += 0.25 * v;
        } else {
            values[idx] += 0.25 * v;
        }
        if pos < resolution {
            values[idx + stride] += 0.25 * v;
        } else {
            values[idx] += 0.25 * v;
        }
    }
}

/// Trilinear splat followed by one binomial smoothing pass.
pub fn splat_normals(samples: &SampleSet, resolution: usize) -> GridVectorField {
    let mut v = splat_trilinear(samples, resolution);
    smooth_binomial(&mut v);
    v
}

/// Divergence of a node-sampled vector field by central differences, falling
/// back to one-sided differences on the boundary layer.
pub fn divergence(v: &GridVectorField) -> Vec<f64> {
    let r = v.resolution;
    let n1 = r + 1;
    let h = 1.0 / r as f64;
    let mut out = vec![0.0; n1 * n1 * n1];
    for axis in 0..3 {
        let comp = v.component(axis);
        let stride = [1, n1, n1 * n1][axis];
        for (idx, o) in out.iter_mut().enumerate() {
            let pos = (idx / stride) % n1;
            *o += if pos == 0 {
                (comp[idx + stride] - comp[idx]) / h
            } else if pos == r {
                (comp[idx] - comp[idx - stride]) / h
            } else {
                (comp[idx + stride] - comp[idx - stride]) / (2.0 * h)
            };
        }
    }
    out
}

/// Per-sample flux weight: each sample stands for one finest-level cell face
/// of surface, so a closed sampled surface yields an indicator jump near 1.
fn sample_flux_weight(resolution: usize) -> f64 {
    let h = 1.0 / resolution as f64;
    h * h
}

/// Right-hand side of the gradient-fit term, `h^3 G^T V`, where `V` is the
/// splatted normal mass converted to a density. Boundary rows are zero.
pub fn gradient_rhs(v: &GridVectorField) -> Vec<f64> {
    let r = v.resolution;
    let n1 = r + 1;
    let h = 1.0 / r as f64;
    // density = mass * weight / h^3; the edge term carries a further h^2
    let scale = sample_flux_weight(r) / h;
    let mut b = vec![0.0; n1 * n1 * n1];
    for axis in 0..3 {
        let comp = v.component(axis);
        let stride = [1, n1, n1 * n1][axis];
        for a in 0..b.len() {
            if (a / stride) % n1 == r {
                continue;
            }
            let e = 0.5 * (comp[a] + comp[a + stride]) * scale;
            b[a] -= e;
            b[a + stride] += e;
        }
    }
    zero_boundary(&mut b, r);
    b
}

pub(crate) fn zero_boundary(values: &mut [f64], resolution: usize) {
    let n1 = resolution + 1;
    for k in 0..n1 {
        for j in 0..n1 {
            for i in 0..n1 {
                if i == 0 || j == 0 || k == 0 || i == resolution || j == resolution || k == resolution {
                    values[(k * n1 + j) * n1 + i] = 0.0;
                }
            }
        }
    }
}

/// `h L + (alpha / n) P^T P` restricted to interior nodes, where `L` is the
/// 7-point graph Laplacian and `P` is trilinear interpolation at the samples.
pub(crate) struct ScreenedOperator {
    resolution: usize,
    stencils: Vec<TrilinearStencil>,
    screen: f64,
}

impl ScreenedOperator {
    pub fn new(resolution: usize, positions: &[Point3], alpha: f64) -> Self {
        let n1 = resolution + 1;
        let screen = if positions.is_empty() { 0.0 } else { alpha / positions.len() as f64 };
        let stencils = if screen > 0.0 {
            positions
                .iter()
                .map(|&p| {
                    let mut s = TrilinearStencil::new(p, resolution);
                    // pinned boundary nodes are not unknowns
                    for c in 0..8 {
                        let idx = s.base + s.offsets[c];
                        let (i, j, k) = (idx % n1, (idx / n1) % n1, idx / (n1 * n1));
                        if i == 0 || j == 0 || k == 0 || i == resolution || j == resolution || k == resolution {
                            s.weights[c] = 0.0;
                        }
                    }
                    s
                })
                .collect()
        } else {
            Vec::new()
        };
        Self { resolution, stencils, screen }
    }

    /// `(alpha / n) P^T (target * 1)`.
    pub fn screening_rhs(&self, target: f64, out: &mut [f64]) {
        for s in &self.stencils {
            for c in 0..8 {
                out[s.base + s.offsets[c]] += self.screen * target * s.weights[c];
            }
        }
    }
}

impl LinearOperator for ScreenedOperator {
    fn dim(&self) -> usize {
        let n1 = self.resolution + 1;
        n1 * n1 * n1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = self.resolution;
        let n1 = r + 1;
        let slab = n1 * n1;
        let h = 1.0 / r as f64;
        y.par_chunks_mut(slab).enumerate().for_each(|(k, ys)| {
            if k == 0 || k == r {
                ys.fill(0.0);
                return;
            }
            let base = k * slab;
            for j in 0..n1 {
                let row = j * n1;
                if j == 0 || j == r {
                    ys[row..row + n1].fill(0.0);
                    continue;
                }
                ys[row] = 0.0;
                ys[row + r] = 0.0;
                for i in 1..r {
                    let c = base + row + i;
                    let nb = x[c - 1] + x[c + 1] + x[c - n1] + x[c + n1] + x[c - slab] + x[c + slab];
                    ys[row + i] = h * (6.0 * x[c] - nb);
                }
            }
        });
        if self.screen > 0.0 {
            for s in &self.stencils {
                let t = s.eval(x) * self.screen;
                for c in 0..8 {
                    y[s.base + s.offsets[c]] += t * s.weights[c];
                }
            }
        }
    }
}

/// Parameters of one screened solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub alpha: f64,
    pub tol: f64,
    /// Defaults to `10 * R` when `None`.
    pub max_cg_iters: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, tol: DEFAULT_TOL, max_cg_iters: None }
    }
}

impl SolverParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", format!("must be > 0, got {}", self.tol)));
        }
        Ok(())
    }

    fn max_iters(&self, resolution: usize) -> usize {
        self.max_cg_iters.unwrap_or(10 * resolution)
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 2 {
        return Err(invalid("resolution", format!("must be >= 2, got {resolution}")));
    }
    Ok(())
}

/// Computes the screened indicator for `samples` on an `R^3` grid.
pub fn solve_screened(
    samples: &SampleSet,
    resolution: usize,
    alpha: f64,
    tol: f64,
    max_cg_iters: usize,
) -> Result<GridField> {
    let params = SolverParams { alpha, tol, max_cg_iters: Some(max_cg_iters) };
    solve_screened_from(samples, resolution, &params, None).map(|(f, _)| f)
}

/// [`solve_screened`] with an optional warm start and solver statistics.
pub fn solve_screened_from(
    samples: &SampleSet,
    resolution: usize,
    params: &SolverParams,
    initial: Option<&GridField>,
) -> Result<(GridField, SolveStats)> {
    check_resolution(resolution)?;
    params.validate()?;
    let v = splat_normals(samples, resolution);
    let rhs = gradient_rhs(&v);
    solve_system(rhs, samples.positions(), resolution, params, initial)
}

/// Solves with `rhs` standing in for the gradient-fit term `h^3 G^T V`.
///
/// With `alpha = 0` this is the Dirichlet problem `-h^3 (discrete Laplacian) chi = rhs`;
/// pass `rhs = -h^3 f` to solve `Laplacian chi = f`. Intended for verification
/// against manufactured solutions.
pub fn solve_with_rhs(
    rhs: &[f64],
    positions: &[Point3],
    resolution: usize,
    params: &SolverParams,
) -> Result<(GridField, SolveStats)> {
    check_resolution(resolution)?;
    params.validate()?;
    let n1 = resolution + 1;
    if rhs.len() != n1 * n1 * n1 {
        return Err(Error::CountMismatch { left: n1 * n1 * n1, right: rhs.len() });
    }
    let mut rhs = rhs.to_vec();
    zero_boundary(&mut rhs, resolution);
    solve_system(rhs, positions, resolution, params, None)
}

fn solve_system(
    mut rhs: Vec<f64>,
    positions: &[Point3],
    resolution: usize,
    params: &SolverParams,
    initial: Option<&GridField>,
) -> Result<(GridField, SolveStats)> {
    let op = ScreenedOperator::new(resolution, positions, params.alpha);
    op.screening_rhs(SCREEN_TARGET, &mut rhs);
    let mut x = match initial {
        Some(f) if f.resolution == resolution => f.values.clone(),
        _ => vec![0.0; op.dim()],
    };
    zero_boundary(&mut x, resolution);
    let stats = conjugate_residual(&op, &rhs, &mut x, params.tol, params.max_iters(resolution))?;
    Ok((GridField { resolution, values: x }, stats))
}
