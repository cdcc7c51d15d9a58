//! Surface reconstruction from unoriented point clouds by iterating a
//! screened Poisson solve with an area-weighted normal update.

// `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cg;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod isosurface;
pub mod metrics;
pub mod orient;
pub mod pipeline;
pub mod poisson;
pub mod sampling;
pub mod spatial;
pub mod toy2d;

pub use error::{Error, Result};
pub use geometry::{BBox, DomainTransform, Point3, TriangleMesh, UnitVector3, Vec3};
pub use pipeline::{run_ipsr, Init, IpsrConfig, IpsrOutput, IterationReport};
pub use poisson::{GridField, GridVectorField, SolverParams};
pub use sampling::SampleSet;
pub use spatial::KdTree;
