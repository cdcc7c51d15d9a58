//! Normal orientation: linking iso-surface faces to nearby samples, the
//! area-weighted normal update, the convergence statistic, and
//! visibility-based initialization.

mod quickhull;
mod visibility;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};
use crate::sampling::SampleSet;
use crate::spatial::KdTree;

pub use quickhull::{quickhull3, COPLANAR_REL_TOL};
pub use visibility::{
    hidden_point_removal, viewpoints, visibility_init, VisibilityInit, DEFAULT_HPR_RADIUS_EXPONENT,
};

pub const DEFAULT_K: usize = 10;
/// Fraction of samples with the largest normal change averaged into `d`.
pub const TOP_FRACTION: f64 = 0.001;
/// Weighted normal sums shorter than this leave the previous normal in place.
pub const MIN_WEIGHTED_NORM: f64 = 1e-12;

/// For every sample, the faces whose centroid has it among its `k` nearest
/// samples. Stored compactly: the faces of sample `i` are
/// `faces[offsets[i]..offsets[i + 1]]`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceLink {
    offsets: Vec<usize>,
    faces: Vec<u32>,
}

impl FaceLink {
    pub fn faces_of(&self, sample: usize) -> &[u32] {
        &self.faces[self.offsets[sample]..self.offsets[sample + 1]]
    }

    pub fn sample_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sum of list lengths over all samples.
    pub fn total_links(&self) -> usize {
        self.faces.len()
    }
}

/// Links each face to the `k` samples nearest its centroid.
pub fn link_faces(mesh: &TriangleMesh, tree: &KdTree, k: usize) -> FaceLink {
    let n = tree.len();
    let near: Vec<Vec<usize>> = (0..mesh.face_count())
        .into_par_iter()
        .map_init(Vec::new, |buf, f| {
            tree.knn_into(mesh.centroid(f), k, buf);
            buf.iter().map(|&(i, _)| i).collect()
        })
        .collect();

    let mut offsets = vec![0usize; n + 1];
    for list in &near {
        for &s in list {
            offsets[s + 1] += 1;
        }
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut faces = vec![0u32; offsets[n]];
    // faces visited in ascending order, so each list comes out sorted
    for (f, list) in near.iter().enumerate() {
        for &s in list {
            faces[cursor[s]] = f as u32;
            cursor[s] += 1;
        }
    }
    FaceLink { offsets, faces }
}

/// Replaces each normal with the normalized area-weighted sum of its linked
/// faces' normals. Degenerate faces are skipped; samples with no usable faces
/// keep their previous normal.
pub fn update_normals(samples: &SampleSet, mesh: &TriangleMesh, links: &FaceLink) -> SampleSet {
    let areas = mesh.face_areas();
    let normals = mesh.face_normals();
    let updated: Vec<Vec3> = (0..samples.len())
        .into_par_iter()
        .map(|s| {
            let sum = links.faces_of(s).iter().fold(Vec3::ZERO, |acc, &f| {
                match normals[f as usize] {
                    Some(n) => acc + n.into_inner() * areas[f as usize],
                    None => acc,
                }
            });
            sum.try_normalize(MIN_WEIGHTED_NORM).unwrap_or(samples.normals()[s])
        })
        .collect();
    samples.with_normals(updated).expect("same sample count")
}

/// The per-sample normal change and its top-fraction average.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStat {
    pub d: f64,
    pub changes: Vec<f64>,
}

/// Mean of the largest `ceil(TOP_FRACTION * n)` values (at least one).
/// Independent of dimension, so the planar replica shares it.
pub fn top_fraction_mean(changes: &[f64]) -> f64 {
    if changes.is_empty() {
        return 0.0;
    }
    let count = ((TOP_FRACTION * changes.len() as f64).ceil() as usize).clamp(1, changes.len());
    let mut sorted = changes.to_vec();
    let pivot = changes.len() - count;
    sorted.select_nth_unstable_by(pivot, f64::total_cmp);
    sorted[pivot..].iter().sum::<f64>() / count as f64
}

/// `d`: the average of the top 0.1% of `||n_cur - n_prev||` over samples.
pub fn convergence_stat(prev: &SampleSet, cur: &SampleSet) -> Result<ConvergenceStat> {
    if prev.len() != cur.len() {
        return Err(Error::CountMismatch { left: prev.len(), right: cur.len() });
    }
    let changes: Vec<f64> = prev
        .normals()
        .iter()
        .zip(cur.normals())
        .map(|(&a, &b)| (b - a).norm())
        .collect();
    Ok(ConvergenceStat { d: top_fraction_mean(&changes), changes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::spatial::brute_force_knn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
        (0..n)
            .map(|_| Vec3::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)))
            .collect()
    }

    fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.norm() > 0.2 && v.norm() < 1.0 {
                return v / v.norm();
            }
        }
    }

    fn random_mesh(faces: usize, rng: &mut ChaCha8Rng) -> TriangleMesh {
        let v = pts(faces * 3, rng);
        let f = (0..faces as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
        TriangleMesh::new(v, f).unwrap()
    }

    #[test]
    fn single_face_single_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mesh = random_mesh(1, &mut rng);
        let tree = KdTree::build(&[Vec3::splat(0.5)], 16).unwrap();
        for k in [1, 5, 10] {
            let l = link_faces(&mesh, &tree, k);
            assert_eq!(l.faces_of(0), &[0]);
        }
    }

    #[test]
    fn links_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples = pts(20, &mut rng);
        let tree = KdTree::build(&samples, 4).unwrap();
        let mesh = random_mesh(1, &mut rng);
        let l = link_faces(&mesh, &tree, 10);
        let want: Vec<usize> = brute_force_knn(&samples, mesh.centroid(0), 10).iter().map(|x| x.0).collect();
        for s in 0..20 {
            assert_eq!(l.faces_of(s).len(), usize::from(want.contains(&s)), "sample {s}");
        }

        let mesh = random_mesh(137, &mut rng);
        let l = link_faces(&mesh, &tree, 10);
        assert_eq!(l.total_links(), 1370);
        assert_eq!(l.sample_count(), 20);
        for s in 0..20 {
            assert!(l.faces_of(s).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn empty_mesh_gives_empty_links() {
        let tree = KdTree::build(&[Vec3::splat(0.5), Vec3::splat(0.2)], 16).unwrap();
        let l = link_faces(&TriangleMesh::empty(), &tree, 10);
        assert_eq!(l.total_links(), 0);
        assert!(l.faces_of(1).is_empty());
    }

    fn flat_mesh(normals_up: &[(bool, f64)]) -> TriangleMesh {
        // right triangles in the z=0.5 plane; area set by leg length
        let mut v = Vec::new();
        let mut f = Vec::new();
        for (i, &(up, area)) in normals_up.iter().enumerate() {
            let leg = (2.0 * area).sqrt();
            let o = Vec3::new(0.0, 0.0, i as f64);
            let b = v.len() as u32;
            v.extend([o, o + Vec3::new(leg, 0.0, 0.0), o + Vec3::new(0.0, leg, 0.0)]);
            f.push(if up { [b, b + 1, b + 2] } else { [b, b + 2, b + 1] });
        }
        TriangleMesh::new(v, f).unwrap()
    }

    fn link_all(faces: usize) -> FaceLink {
        FaceLink { offsets: vec![0, faces], faces: (0..faces as u32).collect() }
    }

    #[test]
    fn single_face_update() {
        let s = SampleSet::from_parts(vec![Vec3::splat(0.5)], vec![Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        let mesh = flat_mesh(&[(true, 0.3)]);
        let out = update_normals(&s, &mesh, &link_all(1));
        assert_eq!(out.normals()[0], Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn weighted_cancellation() {
        let s = SampleSet::from_parts(vec![Vec3::splat(0.5)], vec![Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        let mesh = flat_mesh(&[(true, 2.0), (false, 1.0)]);
        let out = update_normals(&s, &mesh, &link_all(2));
        assert!((out.normals()[0] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn unusable_links_keep_previous() {
        let prev = Vec3::new(0.0, 1.0, 0.0);
        let s = SampleSet::from_parts(vec![Vec3::splat(0.5)], vec![prev]).unwrap();
        // exact cancellation
        let mesh = flat_mesh(&[(true, 1.0), (false, 1.0)]);
        assert_eq!(update_normals(&s, &mesh, &link_all(2)).normals()[0], prev);
        // no links at all
        let empty = FaceLink { offsets: vec![0, 0], faces: vec![] };
        assert_eq!(update_normals(&s, &mesh, &empty).normals()[0], prev);
        // only a degenerate face
        let degenerate = TriangleMesh::new(vec![Vec3::ZERO, Vec3::splat(1.0), Vec3::splat(2.0)], vec![[0, 1, 2]]).unwrap();
        assert_eq!(update_normals(&s, &degenerate, &link_all(1)).normals()[0], prev);
    }

    #[test]
    fn update_matches_accumulate_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample_pos = pts(50, &mut rng);
        let s = SampleSet::from_parts(sample_pos.clone(), (0..50).map(|_| unit(&mut rng)).collect()).unwrap();
        let mesh = random_mesh(400, &mut rng);
        let tree = KdTree::build(&sample_pos, 8).unwrap();
        let links = link_faces(&mesh, &tree, 10);
        let out = update_normals(&s, &mesh, &links);

        // oracle: walk faces, push area * cross-product into each of the k nearest
        let mut acc = vec![Vec3::ZERO; 50];
        for f in 0..mesh.face_count() {
            let [a, b, c] = mesh.triangle(f);
            let cr = (b - a).cross(c - a);
            for (si, _) in brute_force_knn(&sample_pos, (a + b + c) / 3.0, 10) {
                acc[si] += cr * 0.5;
            }
        }
        for (i, a) in acc.iter().enumerate().take(50) {
            let want = if a.norm() < 1e-12 { s.normals()[i] } else { *a / a.norm() };
            assert!((out.normals()[i] - want).norm() < 1e-12, "sample {i}");
            assert!((out.normals()[i].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn convergence_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let positions = pts(1000, &mut rng);
        let normals: Vec<Vec3> = (0..1000).map(|_| unit(&mut rng)).collect();
        let a = SampleSet::from_parts(positions.clone(), normals.clone()).unwrap();
        assert_eq!(convergence_stat(&a, &a).unwrap().d, 0.0);

        let mut flipped = normals.clone();
        flipped[417] = -flipped[417];
        let b = a.with_normals(flipped).unwrap();
        let st = convergence_stat(&a, &b).unwrap();
        assert!((st.d - 2.0).abs() < 1e-15);

        let perturbed: Vec<Vec3> = normals
            .iter()
            .map(|&n| (n + unit(&mut rng) * rng.gen_range(0.0..0.5)).try_normalize(0.0).unwrap())
            .collect();
        let c = a.with_normals(perturbed.clone()).unwrap();
        let st = convergence_stat(&a, &c).unwrap();
        // oracle: full sort, take the largest ceil(0.001 * 1000) = 1
        let mut diffs: Vec<f64> = normals.iter().zip(&perturbed).map(|(p, q)| (*q - *p).norm()).collect();
        diffs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!((st.d - diffs[0]).abs() < 1e-12);
        // symmetric
        assert_eq!(convergence_stat(&c, &a).unwrap().d, st.d);

        let short = SampleSet::from_parts(positions[..10].to_vec(), normals[..10].to_vec()).unwrap();
        assert!(matches!(convergence_stat(&a, &short), Err(Error::CountMismatch { .. })));
    }

    #[test]
    fn top_fraction_uses_ceiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..4321).map(|_| rng.gen()).collect();
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let want = sorted[..5].iter().sum::<f64>() / 5.0;
        assert!((top_fraction_mean(&v) - want).abs() < 1e-12);
        assert_eq!(top_fraction_mean(&[0.3]), 0.3);
    }
}
