use std::f64::consts::PI;

use super::{GeometryError, SurfaceMesh, Vec3};
use crate::Real;

/// Overall skin dimensions in mm: depth (x), width (y), height (z).
pub const DEFAULT_SEMICONE_DIMS: [f64; 3] = [142.0, 164.0, 81.0];

/// Procedural truncated half-cone: the lateral surface of an elliptic cone
/// cut through its axis by the plane `x = 0`.
///
/// The base is a half ellipse with semi-axes `depth` (x) and `width / 2`
/// (y), the top is the same half ellipse scaled by `top_ratio`. The bounding
/// box is `[0, depth] × [-width/2, width/2] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiconeSpec {
    pub dims: [f64; 3],
    pub top_ratio: f64,
    /// Segments around the half circumference; must be even so the apex of
    /// the ellipse (x = depth) lands on a vertex column.
    pub angular_segments: usize,
    pub slant_segments: usize,
}

impl Default for SemiconeSpec {
    fn default() -> Self {
        Self {
            dims: DEFAULT_SEMICONE_DIMS,
            top_ratio: 0.3,
            angular_segments: 48,
            slant_segments: 16,
        }
    }
}

impl SemiconeSpec {
    pub fn with_dims(dims: [f64; 3]) -> Self {
        Self { dims, ..Self::default() }
    }

    /// Vertex count of the generated mesh.
    pub fn vertex_count(&self) -> usize {
        (self.angular_segments + 1) * (self.slant_segments + 1)
    }

    /// Triangle count of the generated mesh.
    pub fn triangle_count(&self) -> usize {
        2 * self.angular_segments * self.slant_segments
    }
}

/// Builds the semicone mesh described by `spec`.
pub fn semicone_mesh<T: Real>(spec: &SemiconeSpec) -> Result<SurfaceMesh<T>, GeometryError> {
    let [depth, width, height] = spec.dims;
    let bad = |v: f64| !(v > 0.0) || !v.is_finite();
    if bad(depth) || bad(width) || bad(height) {
        return Err(GeometryError::Parse {
            line: 0,
            message: format!("semicone dimensions must be positive, got {:?}", spec.dims),
        });
    }
    if !(spec.top_ratio > 0.0 && spec.top_ratio < 1.0) || spec.angular_segments < 2 || spec.slant_segments < 1 {
        return Err(GeometryError::Parse {
            line: 0,
            message: "semicone tessellation parameters out of range".into(),
        });
    }
    let half_width = width / 2.0;
    let (na, ns) = (spec.angular_segments, spec.slant_segments);

    let mut vertices = Vec::with_capacity(spec.vertex_count());
    for j in 0..=ns {
        let s = j as f64 / ns as f64;
        let scale = 1.0 - (1.0 - spec.top_ratio) * s;
        let z = if j == ns { height } else { height * s };
        for i in 0..=na {
            // theta sweeps from +y (0) through +x (pi/2) to -y (pi)
            // (exact values on the three extreme columns)
            let (x, y) = if i == 0 {
                (0.0, half_width * scale)
            } else if i == na {
                (0.0, -half_width * scale)
            } else if 2 * i == na {
                (depth * scale, 0.0)
            } else {
                let theta = PI * i as f64 / na as f64;
                (depth * scale * theta.sin(), half_width * scale * theta.cos())
            };
            vertices.push(Vec3::from_f64(x, y, z));
        }
    }

    let row = na + 1;
    let mut triangles = Vec::with_capacity(spec.triangle_count());
    for j in 0..ns {
        for i in 0..na {
            let v00 = j * row + i;
            let v10 = v00 + 1;
            let v01 = v00 + row;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    SurfaceMesh::new(vertices, triangles)
}
