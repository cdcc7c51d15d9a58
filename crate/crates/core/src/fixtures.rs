//! Analytic test shapes: uniform surface samplers, true inward normals and
//! reference meshes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point3, TriangleMesh, Vec3};
use crate::isosurface::marching_cubes;
use crate::poisson::GridField;
use crate::sampling::random_unit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { center: Point3, radius: f64 },
    /// Axis along z.
    Torus { center: Point3, major: f64, minor: f64 },
    Ellipsoid { center: Point3, axes: Vec3 },
}

impl Shape {
    pub const UNIT_SPHERE: Shape = Shape::Sphere { center: Vec3::splat(0.5), radius: 0.35 };
    pub const UNIT_TORUS: Shape = Shape::Torus { center: Vec3::splat(0.5), major: 0.28, minor: 0.1 };
    pub const UNIT_ELLIPSOID: Shape =
        Shape::Ellipsoid { center: Vec3::splat(0.5), axes: Vec3::new(0.4, 0.28, 0.2) };

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Torus { .. } => "torus",
            Shape::Ellipsoid { .. } => "ellipsoid",
        }
    }

    /// `n` points uniformly distributed by area.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng) -> Point3 {
        match *self {
            Shape::Sphere { center, radius } => center + random_unit(rng) * radius,
            Shape::Torus { center, major, minor } => loop {
                let u = rng.gen_range(0.0..std::f64::consts::TAU);
                let v = rng.gen_range(0.0..std::f64::consts::TAU);
                let ring = major + minor * v.cos();
                if rng.gen::<f64>() * (major + minor) <= ring {
                    break center + Vec3::new(ring * u.cos(), ring * u.sin(), minor * v.sin());
                }
            },
            Shape::Ellipsoid { center, axes } => {
                // area element of the sphere-to-ellipsoid map is proportional
                // to |u / axes|
                let bound = 1.0 / axes.x.min(axes.y).min(axes.z);
                loop {
                    let u = random_unit(rng);
                    let g = Vec3::new(u.x / axes.x, u.y / axes.y, u.z / axes.z).norm();
                    if rng.gen::<f64>() * bound <= g {
                        break center + Vec3::new(u.x * axes.x, u.y * axes.y, u.z * axes.z);
                    }
                }
            }
        }
    }

    /// Positive inside, zero on the surface.
    pub fn inside(&self, p: Point3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => radius - (p - center).norm(),
            Shape::Torus { center, major, minor } => {
                let q = p - center;
                let ring = (q.x * q.x + q.y * q.y).sqrt() - major;
                minor - (ring * ring + q.z * q.z).sqrt()
            }
            Shape::Ellipsoid { center, axes } => {
                let q = p - center;
                1.0 - Vec3::new(q.x / axes.x, q.y / axes.y, q.z / axes.z).norm()
            }
        }
    }

    /// Unit normal pointing into the solid at (or near) `p`.
    pub fn inward_normal(&self, p: Point3) -> Vec3 {
        let g = match *self {
            Shape::Sphere { center, .. } => center - p,
            Shape::Torus { center, major, .. } => {
                let q = p - center;
                let r = (q.x * q.x + q.y * q.y).sqrt();
                let core = if r > 0.0 { Vec3::new(q.x / r * major, q.y / r * major, 0.0) } else { Vec3::ZERO };
                core - q
            }
            Shape::Ellipsoid { center, axes } => {
                let q = p - center;
                -Vec3::new(q.x / (axes.x * axes.x), q.y / (axes.y * axes.y), q.z / (axes.z * axes.z))
            }
        };
        g.try_normalize(0.0).unwrap_or(Vec3::new(1.0, 0.0, 0.0))
    }

    /// Genus-dependent Euler characteristic of the closed surface.
    pub fn euler(&self) -> i64 {
        match self {
            Shape::Torus { .. } => 0,
            _ => 2,
        }
    }

    /// Marching-cubes mesh of the analytic field on the unit cube at the given
    /// grid resolution.
    pub fn reference_mesh(&self, resolution: usize) -> TriangleMesh {
        let field = GridField::from_fn(resolution, |p| self.inside(p));
        marching_cubes(&field, 0.0)
    }
}
