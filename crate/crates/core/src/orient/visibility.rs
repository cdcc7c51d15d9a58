//! Initial normals from hidden point removal seen from 26 viewpoints around
//! the unit cube.

use log::warn;
use rayon::prelude::*;

use super::quickhull::quickhull3;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::sampling::{random_init, SampleSet};

/// Flip radius is `10^exponent` times the farthest point's distance.
pub const DEFAULT_HPR_RADIUS_EXPONENT: f64 = 3.0;

/// Corners, face centers and edge midpoints of the cube of edge 3 that shares
/// its center with the unit cube.
pub fn viewpoints() -> Vec<Point3> {
    let mut out = Vec::with_capacity(26);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push(Vec3::splat(0.5) + Vec3::new(dx as f64, dy as f64, dz as f64) * 1.5);
                }
            }
        }
    }
    out
}

/// Indices of `points` visible from `viewpoint`: spherically flip the points
/// about the viewpoint and keep those on the convex hull of the flipped set
/// together with the viewpoint itself.
pub fn hidden_point_removal(points: &[Point3], viewpoint: Point3, radius_exponent: f64) -> Result<Vec<usize>> {
    let rel: Vec<Point3> = points.iter().map(|&p| p - viewpoint).collect();
    let max_norm = rel.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let radius = 10f64.powf(radius_exponent) * max_norm;
    let mut flipped: Vec<Point3> = rel
        .iter()
        .map(|&p| {
            let n = p.norm();
            if n == 0.0 {
                p
            } else {
                p + p * (2.0 * (radius - n) / n)
            }
        })
        .collect();
    flipped.push(Vec3::ZERO);
    let hull = quickhull3(&flipped)?;
    Ok(hull.into_iter().filter(|&i| i < points.len()).collect())
}

/// Result of [`visibility_init`] with how many samples no viewpoint saw.
#[derive(Debug, Clone)]
pub struct VisibilityInit {
    pub samples: SampleSet,
    pub unseen: usize,
    pub fell_back: bool,
}

/// Each sample's normal is the normalized mean of the unit rays from the
/// viewpoints that see it toward the sample (pointing inward). Unseen samples
/// get `(1, 0, 0)`. Degenerate inputs fall back to random normals (seed 0).
pub fn visibility_init(samples: &SampleSet, radius_exponent: f64) -> VisibilityInit {
    let positions = samples.positions();
    let views = viewpoints();
    let visible: Result<Vec<Vec<usize>>> = views
        .par_iter()
        .map(|&v| hidden_point_removal(positions, v, radius_exponent))
        .collect();
    let visible = match visible {
        Ok(v) => v,
        Err(Error::Coplanar) => {
            warn!("visibility initialization needs 4 non-coplanar samples; using random normals (seed 0)");
            return VisibilityInit { samples: random_init(samples, 0), unseen: 0, fell_back: true };
        }
        Err(e) => unreachable!("hidden point removal only fails on degenerate input: {e}"),
    };

    let mut sums = vec![Vec3::ZERO; positions.len()];
    for (v, seen) in views.iter().zip(&visible) {
        for &i in seen {
            let ray = positions[i] - *v;
            sums[i] += ray / ray.norm();
        }
    }
    let mut unseen = 0;
    let normals = sums
        .into_iter()
        .map(|s| {
            s.try_normalize(1e-12).unwrap_or_else(|| {
                unseen += 1;
                Vec3::new(1.0, 0.0, 0.0)
            })
        })
        .collect();
    VisibilityInit { samples: samples.with_normals(normals).expect("same count"), unseen, fell_back: false }
}
