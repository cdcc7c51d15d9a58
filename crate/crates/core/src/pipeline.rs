//! The iterative driver: initialize normals, then repeat solve, extract, link,
//! update until the normals stop changing, and finish with one last solve.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{connected_components, normalize_to_domain, DomainTransform, Point3, TriangleMesh, Vec3, DEFAULT_PADDING};
use crate::io::{write_mesh, write_oriented_points};
use crate::isosurface::{marching_cubes, mean_sample_value};
use crate::orient::{
    convergence_stat, link_faces, update_normals, visibility_init, DEFAULT_HPR_RADIUS_EXPONENT, DEFAULT_K,
};
use crate::poisson::{solve_screened_from, GridField, SolverParams, DEFAULT_ALPHA, DEFAULT_TOL};
use crate::sampling::{build_samples, random_init, SampleSet, MAX_DEPTH, MIN_DEPTH};
use crate::spatial::{KdTree, DEFAULT_LEAF_SIZE};

pub const DEFAULT_DEPTH: u32 = 7;
pub const DEFAULT_DELTA: f64 = 0.175;
pub const DEFAULT_MAX_ITERS: usize = 30;
pub const MAX_ITERS_LIMIT: usize = 1000;
/// Consecutive empty extractions tolerated before giving up.
pub const COLLAPSE_LIMIT: usize = 3;

/// Maps a world-space position to a normal.
pub type NormalFn = Arc<dyn Fn(Point3) -> Vec3 + Send + Sync>;

#[derive(Clone)]
pub enum Init {
    Random { seed: u64 },
    Visibility,
    /// Normals evaluated at the world-space sample positions.
    Given(NormalFn),
}

impl fmt::Debug for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Random { seed } => write!(f, "Random {{ seed: {seed} }}"),
            Init::Visibility => write!(f, "Visibility"),
            Init::Given(_) => write!(f, "Given(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpsrConfig {
    pub depth: u32,
    pub alpha: f64,
    pub delta: f64,
    pub k: usize,
    pub max_iters: usize,
    pub init: Init,
    pub padding: f64,
    pub tol: f64,
    pub max_cg_iters: Option<usize>,
    /// Run on a single worker thread.
    pub deterministic: bool,
    /// Screening weight of the last solve; `alpha` when unset.
    pub final_alpha: Option<f64>,
    /// Directory receiving `iter_<N>.ply`, `iter_<N>_samples.ply` and
    /// `report.jsonl`.
    pub dump_dir: Option<PathBuf>,
    pub hpr_radius_exponent: f64,
}

impl Default for IpsrConfig {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH,
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            k: DEFAULT_K,
            max_iters: DEFAULT_MAX_ITERS,
            init: Init::Random { seed: 0 },
            padding: DEFAULT_PADDING,
            tol: DEFAULT_TOL,
            max_cg_iters: None,
            deterministic: false,
            final_alpha: None,
            dump_dir: None,
            hpr_radius_exponent: DEFAULT_HPR_RADIUS_EXPONENT,
        }
    }
}

impl IpsrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_DEPTH..=MAX_DEPTH).contains(&self.depth) {
            return Err(invalid("depth", format!("must be in {MIN_DEPTH}..={MAX_DEPTH}, got {}", self.depth)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(1..=MAX_ITERS_LIMIT).contains(&self.max_iters) {
            return Err(invalid("max_iters", format!("must be in 1..={MAX_ITERS_LIMIT}, got {}", self.max_iters)));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be >= 1"));
        }
        for (name, a) in [("alpha", Some(self.alpha)), ("final_alpha", self.final_alpha)] {
            if let Some(a) = a {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(invalid(name, format!("must be finite and >= 0, got {a}")));
                }
            }
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", format!("must be > 0, got {}", self.tol)));
        }
        if !self.hpr_radius_exponent.is_finite() {
            return Err(invalid("hpr_radius_exponent", "must be finite"));
        }
        Ok(())
    }

    fn solver(&self, alpha: f64) -> SolverParams {
        SolverParams { alpha, tol: self.tol, max_cg_iters: self.max_cg_iters }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iter: usize,
    /// `None` when the extraction was empty and the normals were kept.
    pub d: Option<f64>,
    pub faces: usize,
    pub components: usize,
    pub iso: f64,
    pub ms: f64,
    #[serde(skip)]
    pub cg_iters: usize,
}

impl fmt::Display for IterationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iter={} d=", self.iter)?;
        match self.d {
            Some(d) => write!(f, "{d:.6}")?,
            None => write!(f, "-")?,
        }
        write!(f, " faces={} components={}", self.faces, self.components)
    }
}

#[derive(Debug, Clone)]
pub struct IpsrOutput {
    /// World coordinates.
    pub mesh: TriangleMesh,
    /// Domain coordinates; map positions through `transform.to_world`.
    pub samples: SampleSet,
    pub transform: DomainTransform,
    pub reports: Vec<IterationReport>,
    pub converged: bool,
}

/// Initial normals for domain-space `samples`.
pub fn init_normals(samples: &SampleSet, config: &IpsrConfig, transform: &DomainTransform) -> SampleSet {
    match &config.init {
        Init::Random { seed } => random_init(samples, *seed),
        Init::Visibility => visibility_init(samples, config.hpr_radius_exponent).samples,
        Init::Given(f) => {
            let normals = samples
                .positions()
                .iter()
                .map(|&p| f(transform.to_world(p)).try_normalize(0.0).unwrap_or(Vec3::ZERO))
                .collect();
            samples.with_normals(normals).expect("same count")
        }
    }
}

pub fn run_ipsr(points: &[Point3], config: &IpsrConfig) -> Result<IpsrOutput> {
    run_ipsr_with(points, config, |_| {})
}

/// [`run_ipsr`] calling `observe` after every iteration.
pub fn run_ipsr_with(
    points: &[Point3],
    config: &IpsrConfig,
    mut observe: impl FnMut(&IterationReport) + Send,
) -> Result<IpsrOutput> {
    config.validate()?;
    if points.len() < 4 {
        return Err(invalid("points", format!("need at least 4, got {}", points.len())));
    }
    if config.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        pool.install(|| drive(points, config, &mut observe))
    } else {
        drive(points, config, &mut observe)
    }
}

fn drive(points: &[Point3], config: &IpsrConfig, observe: &mut dyn FnMut(&IterationReport)) -> Result<IpsrOutput> {
    let (domain, transform) = normalize_to_domain(points, config.padding)?;
    let resolution = 1usize << config.depth;
    let base = build_samples(&domain, config.depth)?;
    let tree = KdTree::build(base.positions(), DEFAULT_LEAF_SIZE)?;
    let mut samples = init_normals(&base, config, &transform);
    let dumper = config.dump_dir.as_ref().map(Dumper::new).transpose()?;

    let params = config.solver(config.alpha);
    let mut field: Option<GridField> = None;
    let mut reports = Vec::new();
    let mut empty_streak = 0;
    let mut converged = false;
    for iter in 1..=config.max_iters {
        let start = Instant::now();
        let (chi, stats) = solve_screened_from(&samples, resolution, &params, field.as_ref())?;
        let iso = mean_sample_value(&chi, &samples);
        let mesh = marching_cubes(&chi, iso);
        field = Some(chi);

        let mut report = IterationReport {
            iter,
            d: None,
            faces: mesh.face_count(),
            components: 0,
            iso,
            ms: 0.0,
            cg_iters: stats.iterations,
        };
        if mesh.is_empty() {
            empty_streak += 1;
            if empty_streak >= COLLAPSE_LIMIT {
                return Err(Error::FieldCollapsed { consecutive: empty_streak, iteration: iter, iso });
            }
        } else {
            empty_streak = 0;
            report.components = connected_components(&mesh).len();
            let links = link_faces(&mesh, &tree, config.k);
            let updated = update_normals(&samples, &mesh, &links);
            let stat = convergence_stat(&samples, &updated)?;
            report.d = Some(stat.d);
            samples = updated;
        }
        report.ms = start.elapsed().as_secs_f64() * 1e3;
        if let Some(d) = &dumper {
            d.write(&report, &mesh, &samples, &transform)?;
        }
        observe(&report);
        reports.push(report);
        if iter > 1 && reports.last().unwrap().d.is_some_and(|d| d < config.delta) {
            converged = true;
            break;
        }
    }

    let final_params = config.solver(config.final_alpha.unwrap_or(config.alpha));
    let warm = if final_params.alpha == params.alpha { field.as_ref() } else { None };
    let (chi, _) = solve_screened_from(&samples, resolution, &final_params, warm)?;
    let iso = mean_sample_value(&chi, &samples);
    let mesh = marching_cubes(&chi, iso);
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mesh = mesh.map_vertices(|p| transform.to_world(p));
    Ok(IpsrOutput { mesh, samples, transform, reports, converged })
}

struct Dumper {
    dir: PathBuf,
}

impl Dumper {
    fn new(dir: &PathBuf) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let report = dir.join("report.jsonl");
        if report.exists() {
            fs::remove_file(&report)?;
        }
        Ok(Self { dir: dir.clone() })
    }

    fn write(&self, report: &IterationReport, mesh: &TriangleMesh, samples: &SampleSet, t: &DomainTransform) -> Result<()> {
        let world = mesh.clone().map_vertices(|p| t.to_world(p));
        write_mesh(&world, &self.dir.join(format!("iter_{}.ply", report.iter)))?;
        write_oriented_points(samples, t, &self.dir.join(format!("iter_{}_samples.ply", report.iter)))?;
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join("report.jsonl"))?;
        let line = serde_json::to_string(report).map_err(|e| Error::Io(e.into()))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}
