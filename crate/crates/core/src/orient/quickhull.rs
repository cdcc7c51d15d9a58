//! 3D quickhull returning the set of hull vertices.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point3};

/// Plane distances within this fraction of the bounding-box diagonal count as
/// coplanar.
pub const COPLANAR_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
struct Face {
    v: [u32; 3],
    normal: Point3,
    offset: f64,
    outside: Vec<u32>,
    alive: bool,
}

impl Face {
    fn new(points: &[Point3], v: [u32; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i as usize]);
        let n = (b - a).cross(c - a);
        let normal = n / n.norm();
        Face { v, normal, offset: normal.dot(a), outside: Vec::new(), alive: true }
    }

    #[inline]
    fn distance(&self, p: Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

struct Hull<'a> {
    points: &'a [Point3],
    faces: Vec<Face>,
    // directed edge -> owning face
    edges: HashMap<(u32, u32), usize>,
    eps: f64,
}

impl<'a> Hull<'a> {
    fn add_face(&mut self, v: [u32; 3]) -> usize {
        let id = self.faces.len();
        self.faces.push(Face::new(self.points, v));
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        id
    }

    fn remove_face(&mut self, id: usize) {
        let v = self.faces[id].v;
        for k in 0..3 {
            let key = (v[k], v[(k + 1) % 3]);
            if self.edges.get(&key) == Some(&id) {
                self.edges.remove(&key);
            }
        }
        self.faces[id].alive = false;
    }

    fn assign(&mut self, candidates: &[u32], faces: &[usize]) {
        for &p in candidates {
            let q = self.points[p as usize];
            if let Some(&f) = faces.iter().find(|&&f| self.faces[f].distance(q) > self.eps) {
                self.faces[f].outside.push(p);
            }
        }
    }

    fn expand(&mut self) {
        let mut pending: Vec<usize> = (0..self.faces.len()).collect();
        while let Some(fid) = pending.pop() {
            if !self.faces[fid].alive || self.faces[fid].outside.is_empty() {
                continue;
            }
            let face = &self.faces[fid];
            let apex = *face
                .outside
                .iter()
                .max_by(|&&a, &&b| {
                    face.distance(self.points[a as usize])
                        .total_cmp(&face.distance(self.points[b as usize]))
                        .then(b.cmp(&a))
                })
                .unwrap();
            let ap = self.points[apex as usize];

            // visible region: faces connected to `fid` that see the apex
            let mut visible = vec![fid];
            let mut mark = HashMap::from([(fid, ())]);
            let mut i = 0;
            while i < visible.len() {
                let f = visible[i];
                let v = self.faces[f].v;
                for k in 0..3 {
                    if let Some(&g) = self.edges.get(&(v[(k + 1) % 3], v[k])) {
                        if !mark.contains_key(&g) && self.faces[g].distance(ap) > self.eps {
                            mark.insert(g, ());
                            visible.push(g);
                        }
                    }
                }
                i += 1;
            }

            let mut horizon = Vec::new();
            for &f in &visible {
                let v = self.faces[f].v;
                for k in 0..3 {
                    let (a, b) = (v[k], v[(k + 1) % 3]);
                    match self.edges.get(&(b, a)) {
                        Some(g) if mark.contains_key(g) => {}
                        _ => horizon.push((a, b)),
                    }
                }
            }

            let mut orphans = Vec::new();
            for &f in &visible {
                orphans.append(&mut self.faces[f].outside);
                self.remove_face(f);
            }
            let new_faces: Vec<usize> = horizon
                .iter()
                .map(|&(a, b)| self.add_face([a, b, apex]))
                .collect();
            orphans.retain(|&p| p != apex);
            self.assign(&orphans, &new_faces);
            pending.extend(new_faces.iter().filter(|&&f| !self.faces[f].outside.is_empty()));
        }
    }
}

/// Indices of the points that are vertices of their convex hull, ascending.
///
/// Requires at least four points that are not all coplanar (within
/// [`COPLANAR_REL_TOL`] of the bounding-box diagonal).
pub fn quickhull3(points: &[Point3]) -> Result<Vec<usize>> {
    if points.len() < 4 {
        return Err(Error::Coplanar);
    }
    let bbox = BBox::from_points(points).unwrap();
    let eps = COPLANAR_REL_TOL * bbox.diagonal();
    if !(eps > 0.0) {
        return Err(Error::Coplanar);
    }

    // initial simplex from extreme points
    let mut extremes = [0usize; 6];
    for (i, p) in points.iter().enumerate() {
        for a in 0..3 {
            if p[a] < points[extremes[2 * a]][a] {
                extremes[2 * a] = i;
            }
            if p[a] > points[extremes[2 * a + 1]][a] {
                extremes[2 * a + 1] = i;
            }
        }
    }
    let (mut i0, mut i1, mut best) = (0, 0, -1.0);
    for &a in &extremes {
        for &b in &extremes {
            let d = points[a].distance_squared(points[b]);
            if d > best {
                (i0, i1, best) = (a, b, d);
            }
        }
    }
    let dir = points[i1] - points[i0];
    let (i2, d2) = (0..points.len())
        .map(|i| (i, dir.cross(points[i] - points[i0]).norm() / dir.norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if d2 <= eps {
        return Err(Error::Coplanar);
    }
    let n = dir.cross(points[i2] - points[i0]);
    let n = n / n.norm();
    let (i3, d3) = (0..points.len())
        .map(|i| (i, n.dot(points[i] - points[i0])))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    if d3.abs() <= eps {
        return Err(Error::Coplanar);
    }

    let mut hull = Hull { points, faces: Vec::new(), edges: HashMap::new(), eps };
    let [a, b, c, d] = [i0, i1, i2, i3].map(|i| i as u32);
    // orient every face away from the opposite vertex
    let ids: Vec<usize> = [[a, b, c, d], [a, b, d, c], [a, c, d, b], [b, c, d, a]]
        .iter()
        .map(|&[p, q, r, opposite]| {
            let probe = Face::new(points, [p, q, r]);
            if probe.distance(points[opposite as usize]) > 0.0 {
                hull.add_face([p, r, q])
            } else {
                hull.add_face([p, q, r])
            }
        })
        .collect();
    let rest: Vec<u32> = (0..points.len() as u32).filter(|p| ![a, b, c, d].contains(p)).collect();
    hull.assign(&rest, &ids);
    hull.expand();

    let mut on_hull = vec![false; points.len()];
    for f in hull.faces.iter().filter(|f| f.alive) {
        for &v in &f.v {
            on_hull[v as usize] = true;
        }
    }
    Ok((0..points.len()).filter(|&i| on_hull[i]).collect())
}
