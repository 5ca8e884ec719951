//! Skin surface geometry: mesh loading, calibration-target sampling, surface
//! discretization and nearest-point projection.
//!
//! Units are millimeters throughout. Distances are Euclidean (chord), never
//! geodesic.

mod mesh;
mod sampling;
mod semicone;
mod surface;
mod vec3;

use std::path::PathBuf;

use thiserror::Error;

pub use mesh::{closest_point_on_triangle, ray_triangle_intersection, SurfaceMesh};
pub use sampling::{
    point_on_edge, sample_even_spacing, sample_even_spacing_with, sample_random_edge_point,
    EVEN_SPACING_DENSE_MM,
};
pub use semicone::{semicone_mesh, SemiconeSpec, DEFAULT_SEMICONE_DIMS};
pub use surface::{discretize_surface, nearest_surface_point, SurfacePointSet, SurfaceProjection};
pub use vec3::Vec3;

/// Minimum triangle area, in mm², below which a triangle is degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}triangle {triangle}: vertex index {index} out of range for {count} vertices", line_prefix(*.line))]
    IndexOutOfRange {
        line: Option<usize>,
        triangle: usize,
        index: usize,
        count: usize,
    },

    #[error("{}triangle {triangle} is degenerate (area {area:e} mm²)", line_prefix(*.line))]
    DegenerateTriangle {
        line: Option<usize>,
        triangle: usize,
        area: f64,
    },

    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("mesh has no edges to sample from")]
    NoEdges,

    #[error("spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),

    #[error("discretization would produce more than {limit} points")]
    TooDense { limit: usize },

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("query point has a non-finite coordinate")]
    NonFiniteQuery,

    #[error("requested {requested} evenly spaced points, need at least 1")]
    InvalidCount { requested: usize },

    #[error("requested {requested} evenly spaced points but the dense discretization has only {available}")]
    TooFewCandidates { requested: usize, available: usize },
}

fn line_prefix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}
