//! Sample set construction by finest-level grid binning, and random normal
//! initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point3, Vec3};

pub const MIN_DEPTH: u32 = 4;
pub const MAX_DEPTH: u32 = 10;

/// Oriented samples: the state the reconstruction iterates on.
///
/// A zero normal means "not yet initialized"; it contributes nothing to the
/// Poisson right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    positions: Vec<Point3>,
    normals: Vec<Vec3>,
    source_counts: Vec<u32>,
    raw_count: usize,
}

impl SampleSet {
    /// Builds a set directly from positions and normals, one input point per
    /// sample. Positions must lie strictly inside the unit cube.
    pub fn from_parts(positions: Vec<Point3>, normals: Vec<Vec3>) -> Result<Self> {
        if positions.len() != normals.len() {
            return Err(Error::CountMismatch { left: positions.len(), right: normals.len() });
        }
        for p in &positions {
            check_inside(*p)?;
        }
        let n = positions.len();
        Ok(Self { positions, normals, source_counts: vec![1; n], raw_count: n })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    #[inline]
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    #[inline]
    pub fn source_counts(&self) -> &[u32] {
        &self.source_counts
    }

    /// Number of raw input points the samples were built from.
    #[inline]
    pub fn raw_count(&self) -> usize {
        self.raw_count
    }

    /// Returns a copy carrying `normals` instead.
    pub fn with_normals(&self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.len() {
            return Err(Error::CountMismatch { left: self.len(), right: normals.len() });
        }
        Ok(Self { normals, ..self.clone() })
    }

    pub fn set_normals(&mut self, normals: Vec<Vec3>) -> Result<()> {
        if normals.len() != self.len() {
            return Err(Error::CountMismatch { left: self.len(), right: normals.len() });
        }
        self.normals = normals;
        Ok(())
    }
}

fn check_inside(p: Point3) -> Result<()> {
    let inside = |v: f64| v > 0.0 && v < 1.0;
    if inside(p.x) && inside(p.y) && inside(p.z) {
        Ok(())
    } else {
        Err(Error::OutOfDomain { x: p.x, y: p.y, z: p.z })
    }
}

/// Linear index of the grid cell containing `p` at `resolution` cells per axis.
#[inline]
pub(crate) fn cell_key(p: Point3, resolution: usize) -> u64 {
    let r = resolution as f64;
    let c = |v: f64| ((v * r) as usize).min(resolution - 1) as u64;
    let res = resolution as u64;
    (c(p.z) * res + c(p.y)) * res + c(p.x)
}

/// One sample per occupied cell of a `2^depth` grid, placed at the centroid of
/// the points falling in that cell. Samples are ordered by cell index.
pub fn build_samples(points: &[Point3], depth: u32) -> Result<SampleSet> {
    if !(MIN_DEPTH..=MAX_DEPTH).contains(&depth) {
        return Err(invalid(
            "depth",
            format!("must be in {MIN_DEPTH}..={MAX_DEPTH}, got {depth}"),
        ));
    }
    bin_points(points, 1usize << depth)
}

pub(crate) fn bin_points(points: &[Point3], resolution: usize) -> Result<SampleSet> {
    if points.is_empty() {
        return Err(Error::EmptyPointCloud);
    }
    for p in points {
        check_inside(*p)?;
    }
    let mut keyed: Vec<(u64, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| (cell_key(p, resolution), i as u32))
        .collect();
    keyed.sort_unstable();

    let mut positions = Vec::new();
    let mut source_counts = Vec::new();
    for run in keyed.chunk_by(|a, b| a.0 == b.0) {
        let sum = run.iter().fold(Vec3::ZERO, |acc, &(_, i)| acc + points[i as usize]);
        positions.push(sum / run.len() as f64);
        source_counts.push(run.len() as u32);
    }
    let n = positions.len();
    Ok(SampleSet { positions, normals: vec![Vec3::ZERO; n], source_counts, raw_count: points.len() })
}

/// Draws a uniformly distributed unit vector from normalized Gaussian triples.
pub(crate) fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if let Some(u) = v.try_normalize(1e-12) {
            return u;
        }
    }
}

/// Assigns every sample an independent uniformly random unit normal.
pub fn random_init(samples: &SampleSet, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals = (0..samples.len()).map(|_| random_unit(&mut rng)).collect();
    SampleSet { normals, ..samples.clone() }
}
