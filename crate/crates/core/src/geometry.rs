//! Geometric primitives shared by the rest of the crate: a small 3-vector
//! type, unit normals, bounding boxes, the world to unit-domain similarity,
//! and an indexed triangle mesh with cached per-face area and normal.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A 3-component double precision vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Positions are plain vectors; the distinction is by usage only.
pub type Point3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub const fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn distance_squared(self, o: Vec3) -> f64 {
        (self - o).norm_squared()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    #[inline]
    pub fn try_normalize(self, min_norm: f64) -> Option<Vec3> {
        let n = self.norm();
        if n > min_norm && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// A vector of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3(Vec3);

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3(Vec3::new(1.0, 0.0, 0.0));

    /// Normalizes `v`; `None` if it is zero or not finite.
    pub fn new_normalize(v: Vec3) -> Option<Self> {
        v.try_normalize(0.0).map(UnitVector3)
    }

    #[inline]
    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    #[inline]
    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }
}

impl Neg for UnitVector3 {
    type Output = UnitVector3;
    fn neg(self) -> UnitVector3 {
        UnitVector3(-self.0)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point3,
    pub max: Point3,
}

impl BBox {
    pub fn from_points(points: &[Point3]) -> Option<BBox> {
        let first = *points.first()?;
        Some(points.iter().fold(BBox { min: first, max: first }, |b, &p| BBox {
            min: b.min.min(p),
            max: b.max.max(p),
        }))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox { min: self.min.min(o.min), max: self.max.max(o.max) }
    }
}

/// Similarity map from world coordinates into the unit domain:
/// `domain = world * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainTransform {
    pub scale: f64,
    pub offset: Vec3,
}

impl DomainTransform {
    pub const IDENTITY: DomainTransform = DomainTransform { scale: 1.0, offset: Vec3::ZERO };

    #[inline]
    pub fn to_domain(&self, p: Point3) -> Point3 {
        p * self.scale + self.offset
    }

    #[inline]
    pub fn to_world(&self, q: Point3) -> Point3 {
        (q - self.offset) / self.scale
    }
}

/// Default gap kept between the cloud and the domain boundary on each side.
pub const DEFAULT_PADDING: f64 = 0.15;

/// Uniformly scales and translates `points` so that the longest side of their
/// bounding box spans `1 - 2 * padding` and the box is centered in the unit cube.
pub fn normalize_to_domain(
    points: &[Point3],
    padding: f64,
) -> Result<(Vec<Point3>, DomainTransform)> {
    if !(padding > 0.0 && padding < 0.5) {
        return Err(invalid("padding", format!("must lie in (0, 0.5), got {padding}")));
    }
    let bbox = BBox::from_points(points).ok_or(Error::EmptyPointCloud)?;
    if !(bbox.min.is_finite() && bbox.max.is_finite()) {
        return Err(Error::NonFinite);
    }
    let longest = bbox.extent().max_component();
    if longest <= 0.0 {
        return Err(Error::DegenerateExtent);
    }
    let scale = (1.0 - 2.0 * padding) / longest;
    let offset = Vec3::splat(0.5) - bbox.center() * scale;
    let t = DomainTransform { scale, offset };
    Ok((points.iter().map(|&p| t.to_domain(p)).collect(), t))
}

/// Relative size below which a triangle's cross product is treated as zero.
const DEGENERATE_REL: f64 = 1e-14;

/// Area and oriented unit normal of a triangle.
///
/// The normal is `orientation_sign * (v1 - v0) x (v2 - v0)`, normalized. It is
/// `None` when the triangle is degenerate (zero area up to rounding).
pub fn face_area_normal(
    v0: Point3,
    v1: Point3,
    v2: Point3,
    orientation_sign: f64,
) -> (f64, Option<UnitVector3>) {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let c = e1.cross(e2);
    let len = c.norm();
    let scale = e1.norm_squared().max(e2.norm_squared()).max((v2 - v1).norm_squared());
    if len == 0.0 || len <= DEGENERATE_REL * scale {
        return (0.5 * len, None);
    }
    let n = c * (orientation_sign.signum() / len);
    (0.5 * len, Some(UnitVector3(n)))
}

/// Indexed triangle mesh with per-face area and normal cached at construction.
///
/// Face normals follow the winding: `(v1 - v0) x (v2 - v0)`. Meshes produced by
/// [`crate::isosurface::marching_cubes`] are wound so this points toward
/// increasing indicator value, i.e. into the enclosed solid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
    areas: Vec<f64>,
    normals: Vec<Option<UnitVector3>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let len = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i as usize >= len {
                    return Err(Error::IndexOutOfRange { face: fi, index: i as usize, len });
                }
            }
        }
        let (areas, normals) = faces
            .iter()
            .map(|f| {
                face_area_normal(
                    vertices[f[0] as usize],
                    vertices[f[1] as usize],
                    vertices[f[2] as usize],
                    1.0,
                )
            })
            .unzip();
        Ok(Self { vertices, faces, areas, normals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    #[inline]
    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    #[inline]
    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    #[inline]
    pub fn face_areas(&self) -> &[f64] {
        &self.areas
    }

    /// Cached unit normals; `None` marks a degenerate face.
    #[inline]
    pub fn face_normals(&self) -> &[Option<UnitVector3>] {
        &self.normals
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn centroid(&self, face: usize) -> Point3 {
        let [a, b, c] = self.triangle(face);
        (a + b + c) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::from_points(&self.vertices)
    }

    /// Applies `f` to every vertex and rebuilds the face cache.
    pub fn map_vertices(self, f: impl Fn(Point3) -> Point3) -> Self {
        let vertices = self.vertices.into_iter().map(f).collect();
        Self::new(vertices, self.faces).expect("indices unchanged")
    }

    /// Drops the listed faces, keeping all vertices.
    pub fn without_faces(&self, drop: &[usize]) -> Self {
        let mut keep = vec![true; self.faces.len()];
        for &d in drop {
            keep[d] = false;
        }
        let faces = self
            .faces
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(f, _)| *f)
            .collect();
        Self::new(self.vertices.clone(), faces).expect("indices unchanged")
    }

    /// Removes unreferenced vertices, preserving the relative order of the rest.
    pub fn compact(self) -> Self {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                remap[i as usize] = 0;
            }
        }
        let mut vertices = Vec::new();
        for (i, r) in remap.iter_mut().enumerate() {
            if *r == 0 {
                *r = vertices.len() as u32;
                vertices.push(self.vertices[i]);
            }
        }
        let faces = self.faces.iter().map(|f| f.map(|i| remap[i as usize])).collect();
        Self::new(vertices, faces).expect("remapped indices are in range")
    }

    /// Map from undirected edge `(lo, hi)` to the faces using it.
    pub fn edge_faces(&self) -> HashMap<(u32, u32), Vec<usize>> {
        let mut map: HashMap<(u32, u32), Vec<usize>> = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        map
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    /// Groups `0..n` by set; groups are sorted internally and ordered by their
    /// smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(i);
        }
        out
    }
}

/// Partitions faces into edge-connected components, ordered by smallest face index.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(mesh.face_count());
    for faces in mesh.edge_faces().values() {
        for w in faces.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    uf.groups()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tetrahedron(offset: Vec3) -> (Vec<Point3>, Vec<[u32; 3]>) {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0) + offset,
            Vec3::new(1.0, 0.0, 0.0) + offset,
            Vec3::new(0.0, 1.0, 0.0) + offset,
            Vec3::new(0.0, 0.0, 1.0) + offset,
        ];
        let f = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        (v, f)
    }

    #[test]
    fn normalize_two_points() {
        let pts = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        let (out, _) = normalize_to_domain(&pts, 0.15).unwrap();
        assert!((out[0].x - 0.15).abs() < 1e-15);
        assert!((out[1].x - 0.85).abs() < 1e-15);
        for p in &out {
            assert_eq!(p.y, 0.5);
            assert_eq!(p.z, 0.5);
        }
    }

    #[test]
    fn normalize_unit_cube_corners() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        let (out, t) = normalize_to_domain(&pts, 0.15).unwrap();
        assert!((t.scale - 0.7).abs() < 1e-15);
        for (p, q) in pts.iter().zip(&out) {
            let expect = Vec3::splat(0.15) + *p * 0.7;
            assert!(q.distance(expect) < 1e-15);
        }
    }

    #[test]
    fn normalize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..1000)
            .map(|_| Vec3::new(rng.gen_range(-50.0..80.0), rng.gen_range(3.0..4.0), rng.gen_range(-1e3..1e3)))
            .collect();
        let (out, t) = normalize_to_domain(&pts, 0.15).unwrap();
        for (p, q) in pts.iter().zip(&out) {
            assert!(q.x > 0.0 && q.x < 1.0 && q.y > 0.0 && q.z < 1.0);
            let back = t.to_world(*q);
            assert!(back.distance(*p) <= 1e-9 * p.norm().max(1.0));
        }
    }

    #[test]
    fn normalize_errors() {
        assert!(matches!(normalize_to_domain(&[], 0.15), Err(Error::EmptyPointCloud)));
        let same = [Vec3::splat(1.0); 3];
        let err = normalize_to_domain(&same, 0.15).unwrap_err();
        assert!(matches!(err, Error::DegenerateExtent));
        assert!(err.to_string().contains("degenerate extent"));
        assert!(normalize_to_domain(&same, 0.5).is_err());
    }

    #[test]
    fn unit_right_triangle() {
        let (a, n) = face_area_normal(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 1.0);
        assert_eq!(a, 0.5);
        assert_eq!(n.unwrap().into_inner(), Vec3::new(0.0, 0.0, 1.0));
        let (_, n) = face_area_normal(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), -1.0);
        assert_eq!(n.unwrap().into_inner(), Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn colinear_triangle_is_flagged() {
        let (a, n) = face_area_normal(Vec3::ZERO, Vec3::splat(1.0), Vec3::splat(2.0), 1.0);
        assert_eq!(a, 0.0);
        assert!(n.is_none());
    }

    #[test]
    fn area_matches_heron() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut r = || Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for _ in 0..100 {
            let (p, q, s) = (r(), r(), r());
            let (a, b, c) = (p.distance(q), q.distance(s), s.distance(p));
            // Kahan's numerically stable Heron form.
            let mut e = [a, b, c];
            e.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let [a, b, c] = e;
            let heron = 0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).sqrt();
            let (area, n) = face_area_normal(p, q, s, 1.0);
            assert!((area - heron).abs() < 1e-9, "{area} vs {heron}");
            assert!((n.unwrap().as_vec().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_rejects_bad_index() {
        let err = TriangleMesh::new(vec![Vec3::ZERO; 2], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 2, .. }));
    }

    #[test]
    fn cache_matches_recomputation() {
        let (v, f) = tetrahedron(Vec3::ZERO);
        let mesh = TriangleMesh::new(v, f).unwrap();
        for i in 0..mesh.face_count() {
            let [a, b, c] = mesh.triangle(i);
            let (area, n) = face_area_normal(a, b, c, 1.0);
            assert_eq!(area, mesh.face_areas()[i]);
            assert_eq!(n, mesh.face_normals()[i]);
        }
    }

    #[test]
    fn tetrahedron_components() {
        let (v, f) = tetrahedron(Vec3::ZERO);
        let mesh = TriangleMesh::new(v, f).unwrap();
        assert_eq!(connected_components(&mesh), vec![vec![0, 1, 2, 3]]);

        let (mut v, mut f) = tetrahedron(Vec3::ZERO);
        let (v2, f2) = tetrahedron(Vec3::splat(5.0));
        f.extend(f2.iter().map(|t| t.map(|i| i + 4)));
        v.extend(v2);
        // interleave so ordering by smallest index is exercised
        f.swap(1, 4);
        let mesh = TriangleMesh::new(v, f).unwrap();
        let comps = connected_components(&mesh);
        assert_eq!(comps, vec![vec![0, 2, 3, 4], vec![1, 5, 6, 7]]);
    }
}
