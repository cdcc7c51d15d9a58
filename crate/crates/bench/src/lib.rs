//! Shared inputs for the benchmarks.

use ipsr_core::fixtures::Shape;
use ipsr_core::geometry::normalize_to_domain;
use ipsr_core::sampling::build_samples;
use ipsr_core::SampleSet;

/// Sphere samples at `depth` carrying their exact inward normals.
pub fn oriented_sphere(points: usize, depth: u32) -> SampleSet {
    let shape = Shape::UNIT_SPHERE;
    let (domain, t) = normalize_to_domain(&shape.sample(points, 1), 0.15).expect("valid fixture");
    let s = build_samples(&domain, depth).expect("valid depth");
    let normals = s.positions().iter().map(|&p| shape.inward_normal(t.to_world(p))).collect();
    s.with_normals(normals).expect("same count")
}
