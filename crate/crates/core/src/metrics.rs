//! Reconstruction quality: sampled symmetric surface distance, inward-normal
//! fraction against a known truth, and topology checks.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{connected_components, BBox, Point3, TriangleMesh, Vec3};
use crate::sampling::SampleSet;
use crate::spatial::{KdTree, DEFAULT_LEAF_SIZE};

pub const DEFAULT_SAMPLES_PER_DIRECTION: usize = 100_000;
pub const MIN_SAMPLES_PER_DIRECTION: usize = 1000;

/// Closest point to `p` on triangle `abc` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bbox: BBox,
    // leaf: start..start+count into `order`; inner: children at left, left+1
    left: u32,
    start: u32,
    count: u32,
}

/// Bounding-volume hierarchy over a mesh's triangles for nearest-point
/// queries.
pub struct TriangleBvh<'a> {
    mesh: &'a TriangleMesh,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

const BVH_LEAF: usize = 4;

fn box_distance_squared(b: &BBox, p: Point3) -> f64 {
    let d = (b.min - p).max(Vec3::ZERO).max(p - b.max);
    d.norm_squared()
}

impl<'a> TriangleBvh<'a> {
    pub fn build(mesh: &'a TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let boxes: Vec<BBox> = (0..mesh.face_count())
            .map(|f| BBox::from_points(&mesh.triangle(f)).unwrap())
            .collect();
        let centers: Vec<Point3> = boxes.iter().map(BBox::center).collect();
        let mut bvh = TriangleBvh { mesh, nodes: Vec::new(), order: (0..mesh.face_count() as u32).collect() };
        bvh.nodes.push(Node { bbox: boxes[0], left: 0, start: 0, count: 0 });
        bvh.split(0, 0, mesh.face_count(), &boxes, &centers);
        Ok(bvh)
    }

    fn split(&mut self, node: usize, start: usize, end: usize, boxes: &[BBox], centers: &[Point3]) {
        let slice = &mut self.order[start..end];
        let bbox = slice.iter().skip(1).fold(boxes[slice[0] as usize], |b, &f| b.union(&boxes[f as usize]));
        if end - start <= BVH_LEAF {
            self.nodes[node] = Node { bbox, left: 0, start: start as u32, count: (end - start) as u32 };
            return;
        }
        let cb = BBox::from_points(&slice.iter().map(|&f| centers[f as usize]).collect::<Vec<_>>()).unwrap();
        let e = cb.extent();
        let axis = if e.x >= e.y && e.x >= e.z { 0 } else if e.y >= e.z { 1 } else { 2 };
        let mid = (end - start) / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            centers[a as usize][axis].total_cmp(&centers[b as usize][axis]).then(a.cmp(&b))
        });
        let left = self.nodes.len();
        self.nodes.push(Node { bbox, left: 0, start: 0, count: 0 });
        self.nodes.push(Node { bbox, left: 0, start: 0, count: 0 });
        self.nodes[node] = Node { bbox, left: left as u32, start: 0, count: 0 };
        self.split(left, start, start + mid, boxes, centers);
        self.split(left + 1, start + mid, end, boxes, centers);
    }

    /// Distance from `p` to the closest point of the mesh.
    pub fn distance(&self, p: Point3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = self.nodes[n];
            if box_distance_squared(&node.bbox, p) >= best {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = self.mesh.triangle(f as usize);
                    best = best.min(closest_point_on_triangle(p, a, b, c).distance_squared(p));
                }
            } else {
                let (l, r) = (node.left as usize, node.left as usize + 1);
                let (dl, dr) = (box_distance_squared(&self.nodes[l].bbox, p), box_distance_squared(&self.nodes[r].bbox, p));
                // visit the nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.sqrt()
    }
}

/// `n` points uniformly distributed over the mesh surface by area.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Point3>> {
    if mesh.is_empty() || mesh.total_area() <= 0.0 {
        return Err(Error::EmptyMesh);
    }
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut acc = 0.0;
    for &a in mesh.face_areas() {
        acc += a;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let t = rng.gen::<f64>() * acc;
            let f = cumulative.partition_point(|&c| c <= t).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDistance {
    /// Mean over both directions, divided by `scale`.
    pub mean: f64,
    pub max: f64,
    pub scale: f64,
}

/// Symmetric sampled distance normalized by the reference's bounding-box
/// diagonal. Both meshes are sampled with the same seed.
pub fn symmetric_distance(
    recon: &TriangleMesh,
    reference: &TriangleMesh,
    samples_per_direction: usize,
    seed: u64,
) -> Result<SurfaceDistance> {
    let scale = reference.bbox().ok_or(Error::EmptyMesh)?.diagonal();
    symmetric_distance_scaled(recon, reference, samples_per_direction, seed, scale)
}

/// [`symmetric_distance`] with an explicit normalization scale.
pub fn symmetric_distance_scaled(
    a: &TriangleMesh,
    b: &TriangleMesh,
    samples_per_direction: usize,
    seed: u64,
    scale: f64,
) -> Result<SurfaceDistance> {
    if samples_per_direction < MIN_SAMPLES_PER_DIRECTION {
        return Err(invalid(
            "samples_per_direction",
            format!("must be >= {MIN_SAMPLES_PER_DIRECTION}, got {samples_per_direction}"),
        ));
    }
    if !(scale > 0.0) {
        return Err(invalid("scale", format!("must be > 0, got {scale}")));
    }
    let (bvh_a, bvh_b) = (TriangleBvh::build(a)?, TriangleBvh::build(b)?);
    let from_a = sample_surface(a, samples_per_direction, seed)?;
    let from_b = sample_surface(b, samples_per_direction, seed)?;
    let mut d: Vec<f64> = from_a.par_iter().map(|&p| bvh_b.distance(p)).collect();
    d.par_extend(from_b.par_iter().map(|&p| bvh_a.distance(p)));
    // sort so the pooled sum does not depend on argument order
    d.sort_unstable_by(f64::total_cmp);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let max = *d.last().unwrap();
    Ok(SurfaceDistance { mean: mean / scale, max: max / scale, scale })
}

/// Fraction of samples whose normal has positive dot product with `truth` at
/// its position.
pub fn inward_fraction(samples: &SampleSet, truth: impl Fn(Point3) -> Vec3 + Sync) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .positions()
        .par_iter()
        .zip(samples.normals())
        .filter(|(&p, n)| n.dot(truth(p)) > 0.0)
        .count();
    hits as f64 / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    /// Every edge has exactly two incident faces.
    pub closed: bool,
    /// `V - E + F` over vertices referenced by faces.
    pub euler: i64,
    pub components: usize,
}

pub fn topology_check(mesh: &TriangleMesh) -> Topology {
    let edges = mesh.edge_faces();
    let closed = !mesh.is_empty() && edges.values().all(|f| f.len() == 2);
    let used: HashSet<u32> = mesh.faces().iter().flatten().copied().collect();
    let euler = used.len() as i64 - edges.len() as i64 + mesh.face_count() as i64;
    Topology { closed, euler, components: connected_components(mesh).len() }
}

/// Drops vertices farther than `max_distance` from every input point, with
/// their incident faces.
pub fn trim_far_vertices(mesh: &TriangleMesh, points: &[Point3], max_distance: f64) -> Result<TriangleMesh> {
    if !(max_distance > 0.0) {
        return Err(invalid("trim distance", format!("must be > 0, got {max_distance}")));
    }
    let tree = KdTree::build(points, DEFAULT_LEAF_SIZE)?;
    let far: Vec<bool> = mesh
        .vertices()
        .par_iter()
        .map(|&v| tree.knn(v, 1)[0].1 > max_distance)
        .collect();
    let drop: Vec<usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.iter().any(|&i| far[i as usize]))
        .map(|(i, _)| i)
        .collect();
    Ok(mesh.without_faces(&drop).compact())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Shape;
    use crate::sampling::random_init;

    fn regular_tetrahedron(offset: Vec3) -> TriangleMesh {
        let s = 1.0 / 8f64.sqrt();
        let v = [
            Vec3::new(s, s, s),
            Vec3::new(s, -s, -s),
            Vec3::new(-s, s, -s),
            Vec3::new(-s, -s, s),
        ];
        TriangleMesh::new(v.iter().map(|&p| p + offset).collect(), vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
            .unwrap()
    }

    fn brute_distance(mesh: &TriangleMesh, p: Point3) -> f64 {
        (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                closest_point_on_triangle(p, a, b, c).distance(p)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let cases = [
            (Vec3::new(0.2, 0.2, 1.0), Vec3::new(0.2, 0.2, 0.0)),
            (Vec3::new(-1.0, -1.0, 0.0), a),
            (Vec3::new(2.0, -0.5, 0.0), b),
            (Vec3::new(0.5, -1.0, 0.3), Vec3::new(0.5, 0.0, 0.0)),
            (Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.5, 0.5, 0.0)),
            (Vec3::new(-0.5, 0.5, 0.0), Vec3::new(0.0, 0.5, 0.0)),
        ];
        for (p, want) in cases {
            assert!(closest_point_on_triangle(p, a, b, c).distance(want) < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn self_distance_is_zero() {
        let m = Shape::UNIT_SPHERE.reference_mesh(24);
        let d = symmetric_distance(&m, &m, 2000, 1).unwrap();
        assert!(d.mean < 1e-9 && d.max < 1e-9, "{d:?}");
    }

    #[test]
    fn translated_tetrahedron() {
        let a = regular_tetrahedron(Vec3::ZERO);
        let t = Vec3::new(0.01, 0.0, 0.0);
        let b = regular_tetrahedron(t);
        let diag = a.bbox().unwrap().diagonal();
        let d = symmetric_distance(&b, &a, 20000, 3).unwrap();
        // exposed faces leave the other solid by n . t
        let lower = (0..a.face_count())
            .filter_map(|f| a.face_normals()[f])
            .map(|n| (-n.as_vec().dot(t)).abs())
            .fold(0.0, f64::max);
        assert!(d.mean <= 0.01 / diag);
        assert!(d.max >= lower / diag * (1.0 - 1e-3), "{} < {}", d.max, lower / diag);
        assert!(d.max <= 0.01 / diag + 1e-12);

        // dense brute-force oracle with an independent sample stream
        let oracle: f64 = sample_surface(&b, 40000, 99)
            .unwrap()
            .iter()
            .map(|&p| brute_distance(&a, p))
            .chain(sample_surface(&a, 40000, 98).unwrap().iter().map(|&p| brute_distance(&b, p)))
            .sum::<f64>()
            / 80000.0
            / diag;
        assert!((d.mean - oracle).abs() < 0.03 * oracle, "{} vs {oracle}", d.mean);
    }

    #[test]
    fn bvh_matches_brute_force() {
        let m = Shape::UNIT_TORUS.reference_mesh(20);
        let bvh = TriangleBvh::build(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            assert_eq!(bvh.distance(p), brute_distance(&m, p));
        }
    }

    #[test]
    fn grid_sphere_against_finer_sphere() {
        let coarse = Shape::UNIT_SPHERE.reference_mesh(64);
        let fine = Shape::UNIT_SPHERE.reference_mesh(128);
        let d = symmetric_distance(&coarse, &fine, 20000, 5).unwrap();
        assert!(d.mean < 2.0 / 64.0 / d.scale, "{d:?}");
    }

    #[test]
    fn symmetric_when_scale_fixed() {
        let a = Shape::UNIT_SPHERE.reference_mesh(16);
        let b = Shape::UNIT_ELLIPSOID.reference_mesh(16);
        let ab = symmetric_distance_scaled(&a, &b, 3000, 7, 1.0).unwrap();
        let ba = symmetric_distance_scaled(&b, &a, 3000, 7, 1.0).unwrap();
        assert_eq!(ab.mean, ba.mean);
        assert_eq!(ab.max, ba.max);
        assert!(0.0 <= ab.mean && ab.mean <= ab.max);
    }

    #[test]
    fn distance_errors() {
        let m = Shape::UNIT_SPHERE.reference_mesh(8);
        assert!(matches!(symmetric_distance(&m, &TriangleMesh::empty(), 1000, 0), Err(Error::EmptyMesh)));
        assert!(symmetric_distance(&m, &m, 999, 0).is_err());
    }

    #[test]
    fn inward_fraction_cases() {
        let shape = Shape::UNIT_SPHERE;
        let pts = shape.sample(100_000, 9);
        let truth = |p: Point3| shape.inward_normal(p);
        let exact = SampleSet::from_parts(pts.clone(), pts.iter().map(|&p| truth(p)).collect()).unwrap();
        assert_eq!(inward_fraction(&exact, truth), 1.0);
        let flipped = exact.with_normals(exact.normals().iter().map(|&n| -n).collect()).unwrap();
        assert_eq!(inward_fraction(&flipped, truth), 0.0);
        let f = inward_fraction(&random_init(&exact, 3), truth);
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn topology_of_fixtures() {
        let t = topology_check(&Shape::UNIT_SPHERE.reference_mesh(32));
        assert_eq!(t, Topology { closed: true, euler: 2, components: 1 });
        let torus = Shape::UNIT_TORUS.reference_mesh(32);
        let t = topology_check(&torus);
        assert!(t.closed);
        assert_eq!(t.euler, 0);
        assert!(!topology_check(&torus.without_faces(&[0])).closed);
    }

    #[test]
    fn trim_drops_far_region() {
        let m = Shape::UNIT_SPHERE.reference_mesh(32);
        // keep only points from the upper half
        let pts: Vec<Point3> = Shape::UNIT_SPHERE.sample(20000, 2).into_iter().filter(|p| p.z > 0.5).collect();
        let trimmed = trim_far_vertices(&m, &pts, 0.03).unwrap();
        assert!(trimmed.face_count() < m.face_count() * 3 / 5);
        assert!(trimmed.vertices().iter().all(|v| v.z > 0.5 - 0.04));
        let all = trim_far_vertices(&m, &Shape::UNIT_SPHERE.sample(20000, 2), 0.03).unwrap();
        assert_eq!(all.face_count(), m.face_count());
    }
}
