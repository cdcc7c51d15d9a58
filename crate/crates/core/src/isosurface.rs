//! Marching cubes over a [`GridField`].
//!
//! The 256-entry case table is generated once from a single rule applied to
//! every cube face: crossings are paired so that "inside" corners (value above
//! the iso-value) on opposite diagonals stay separated. Neighboring cubes see
//! the same sign pattern on their shared face and therefore agree on its
//! segments, so the output is closed wherever the level set does not reach
//! the domain boundary. Triangles are wound so that `(v1 - v0) x (v2 - v0)`
//! points toward increasing field value.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::geometry::{Point3, TriangleMesh, Vec3};
use crate::poisson::GridField;
use crate::sampling::SampleSet;

/// Corner `c` of a cube sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as (lower corner, upper corner).
const EDGES: [(usize, usize); 12] = [
    (0, 1), (2, 3), (4, 5), (6, 7), // along x
    (0, 2), (1, 3), (4, 6), (5, 7), // along y
    (0, 4), (1, 5), (2, 6), (3, 7), // along z
];

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == (lo, hi)).expect("corners share an edge")
}

/// Triangle corners `>= CENTER_BASE` refer to the center of ring
/// `id - CENTER_BASE` rather than to a cube edge.
const CENTER_BASE: u8 = 12;

/// Triangulation of one sign configuration.
#[derive(Debug, Default)]
struct Case {
    /// Closed loops of cut cube edges.
    rings: Vec<Vec<u8>>,
    tris: Vec<[u8; 3]>,
}

type CaseTable = Vec<Case>;

fn share_face(faces: &[[usize; 4]; 6], e: u8, f: u8) -> bool {
    let on = |face: &[usize; 4], edge: u8| {
        let (a, b) = EDGES[edge as usize];
        face.contains(&a) && face.contains(&b)
    };
    faces.iter().any(|face| on(face, e) && on(face, f))
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_case_table)
}

/// The six cube faces with corners in counter-clockwise order seen from outside.
fn oriented_faces() -> [[usize; 4]; 6] {
    let raw = [
        ([0, 2, 6, 4], [-1.0, 0.0, 0.0]),
        ([1, 3, 7, 5], [1.0, 0.0, 0.0]),
        ([0, 1, 5, 4], [0.0, -1.0, 0.0]),
        ([2, 3, 7, 6], [0.0, 1.0, 0.0]),
        ([0, 1, 3, 2], [0.0, 0.0, -1.0]),
        ([4, 5, 7, 6], [0.0, 0.0, 1.0]),
    ];
    raw.map(|(mut corners, outward)| {
        let p = |c: usize| {
            let o = corner_offset(c);
            Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
        };
        let n = (p(corners[1]) - p(corners[0])).cross(p(corners[2]) - p(corners[1]));
        if n.dot(Vec3::from_array(outward)) < 0.0 {
            corners.reverse();
        }
        corners
    })
}

fn build_case_table() -> CaseTable {
    let faces = oriented_faces();
    let mut table = Vec::with_capacity(256);
    for case in 0..256usize {
        let inside = |c: usize| case >> c & 1 == 1;
        // directed segments: from an outside->inside crossing to the next
        // inside->outside crossing walking counter-clockwise
        let mut next = [usize::MAX; 12];
        for face in &faces {
            for s in 0..4 {
                let (a, b) = (face[s], face[(s + 1) % 4]);
                if inside(a) || !inside(b) {
                    continue;
                }
                let start = edge_between(a, b);
                for t in 1..4 {
                    let (c, d) = (face[(s + t) % 4], face[(s + t + 1) % 4]);
                    if inside(c) && !inside(d) {
                        next[start] = edge_between(c, d);
                        break;
                    }
                }
            }
        }
        let mut visited = [false; 12];
        let mut tris = Vec::new();
        let mut ring_table: Vec<Vec<u8>> = Vec::new();
        for e0 in 0..12 {
            if next[e0] == usize::MAX || visited[e0] {
                continue;
            }
            let mut ring = Vec::new();
            let mut e = e0;
            while !visited[e] {
                visited[e] = true;
                ring.push(e as u8);
                e = next[e];
            }
            // The ring winds clockwise around the inside region as seen from the
            // inside, so every triangle below is emitted reversed.
            //
            // A fan diagonal between two points on the same cube face could be
            // produced by the neighbor cube as well, giving an edge four faces.
            // Pick a fan apex with no such diagonal, else add a center vertex.
            let len = ring.len();
            let apex = (0..len).find(|&a| {
                (2..len - 1).all(|d| !share_face(&faces, ring[a], ring[(a + d) % len]))
            });
            match apex {
                Some(a) => {
                    for i in 1..len - 1 {
                        let (p, q) = (ring[(a + i) % len], ring[(a + i + 1) % len]);
                        tris.push([ring[a], q, p]);
                    }
                }
                None => {
                    let center = CENTER_BASE + ring_table.len() as u8;
                    for i in 0..len {
                        tris.push([center, ring[(i + 1) % len], ring[i]]);
                    }
                }
            }
            ring_table.push(ring);
        }
        table.push(Case { rings: ring_table, tris });
    }
    table
}

/// Extracts the `iso` level set of `field` as a welded triangle mesh.
///
/// A node counts as inside when its value exceeds `iso`. Faces are emitted in
/// cell order. If `iso` lies outside the field's range the mesh is empty.
pub fn marching_cubes(field: &GridField, iso: f64) -> TriangleMesh {
    let table = case_table();
    let r = field.resolution();
    let n1 = r + 1;
    let vals = field.values();
    let h = field.spacing();

    let corner_off: [usize; 8] = std::array::from_fn(|c| {
        let o = corner_offset(c);
        (o[2] * n1 + o[1]) * n1 + o[0]
    });

    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut weld: HashMap<u64, u32> = HashMap::new();

    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                let base = (k * n1 + j) * n1 + i;
                let mut case = 0usize;
                for (c, off) in corner_off.iter().enumerate() {
                    if vals[base + off] > iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let entry = &table[case];
                let mut vid = [u32::MAX; 16];
                let mut edge_vertex = |e: usize, vertices: &mut Vec<Point3>| -> u32 {
                    if vid[e] == u32::MAX {
                        let (ca, cb) = EDGES[e];
                        let (ia, ib) = (base + corner_off[ca], base + corner_off[cb]);
                        let axis = e / 4;
                        let key = ia as u64 * 3 + axis as u64;
                        vid[e] = *weld.entry(key).or_insert_with(|| {
                            let (va, vb) = (vals[ia], vals[ib]);
                            let t = (iso - va) / (vb - va);
                            let oa = corner_offset(ca);
                            let mut p = Vec3::new((i + oa[0]) as f64, (j + oa[1]) as f64, (k + oa[2]) as f64);
                            match axis {
                                0 => p.x += t,
                                1 => p.y += t,
                                _ => p.z += t,
                            }
                            vertices.push(p * h);
                            (vertices.len() - 1) as u32
                        });
                    }
                    vid[e]
                };
                let mut centers = [u32::MAX; 4];
                for tri in &entry.tris {
                    let mut f = [0u32; 3];
                    for (slot, &e) in tri.iter().enumerate() {
                        f[slot] = if e < CENTER_BASE {
                            edge_vertex(e as usize, &mut vertices)
                        } else {
                            let ring = (e - CENTER_BASE) as usize;
                            if centers[ring] == u32::MAX {
                                let ids: Vec<u32> = entry.rings[ring]
                                    .iter()
                                    .map(|&re| edge_vertex(re as usize, &mut vertices))
                                    .collect();
                                let c = ids.iter().fold(Vec3::ZERO, |acc, &v| acc + vertices[v as usize])
                                    / ids.len() as f64;
                                vertices.push(c);
                                centers[ring] = (vertices.len() - 1) as u32;
                            }
                            centers[ring]
                        };
                    }
                    faces.push(f);
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("extracted indices are in range")
}

/// Mean of the field, trilinearly interpolated at every sample.
pub fn mean_sample_value(field: &GridField, samples: &SampleSet) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples
        .positions()
        .iter()
        .map(|&p| field.eval_trilinear(p).expect("samples lie in the unit domain"))
        .sum();
    sum / samples.len() as f64
}
