use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyPointCloud,

    #[error("degenerate extent: all points coincide")]
    DegenerateExtent,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite coordinate in input")]
    NonFinite,

    #[error("face {face} references vertex {index}, but the mesh has {len} vertices")]
    IndexOutOfRange { face: usize, index: usize, len: usize },

    #[error("point ({x}, {y}, {z}) lies outside the unit domain")]
    OutOfDomain { x: f64, y: f64, z: f64 },

    #[error("sample count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },

    #[error("all points are coplanar")]
    Coplanar,

    #[error("conjugate gradient stopped after {iterations} iterations at relative residual {residual:.3e} (target {tol:.1e})")]
    SolverNotConverged { iterations: usize, residual: f64, tol: f64 },

    #[error("field collapsed: iso-surface empty on {consecutive} consecutive iterations (last iteration {iteration}, iso {iso:.6e})")]
    FieldCollapsed { consecutive: usize, iteration: usize, iso: f64 },

    #[error("empty mesh")]
    EmptyMesh,

    #[error("{}: {location}: {message}", path.display())]
    Parse { path: PathBuf, location: ParseLocation, message: String },

    #[error("unsupported file extension for {0}")]
    UnknownFormat(PathBuf),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Where in an input file a parse error occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseLocation {
    Line(usize),
    Byte(u64),
}

impl std::fmt::Display for ParseLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseLocation::Line(l) => write!(f, "line {l}"),
            ParseLocation::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
