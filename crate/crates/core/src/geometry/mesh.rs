use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{GeometryError, Vec3, MIN_TRIANGLE_AREA};
use crate::Real;

/// Triangle mesh of the skin's outer surface.
///
/// Immutable once built. The undirected edge list is derived from the
/// triangles, deduplicated and sorted by `(low, high)` vertex index.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
}

impl<T: Real> SurfaceMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        Self::validated(vertices, triangles, None)
    }

    fn validated(
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[usize; 3]>,
        lines: Option<&[usize]>,
    ) -> Result<Self, GeometryError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let line_of = |t: usize| lines.map(|l| l[t]);
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index >= vertices.len() {
                    return Err(GeometryError::IndexOutOfRange {
                        line: line_of(t),
                        triangle: t,
                        index,
                        count: vertices.len(),
                    });
                }
            }
            let area = triangle_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]).as_f64();
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(GeometryError::DegenerateTriangle {
                    line: line_of(t),
                    triangle: t,
                    area,
                });
            }
        }

        let mut edge_set = BTreeSet::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_set.insert([a.min(b), a.max(b)]);
            }
        }
        Ok(Self {
            vertices,
            triangles,
            edges: edge_set.into_iter().collect(),
        })
    }

    /// Parses the `v x y z` / `f i j k` text format (1-based face indices,
    /// `#` comments, blank lines ignored).
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut face_lines = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            let tag = tokens.next().unwrap_or_default();
            let fields: Vec<&str> = tokens.collect();
            let parse_err = |message: String| GeometryError::Parse { line, message };
            match tag {
                "v" => {
                    if fields.len() != 3 {
                        return Err(parse_err(format!("vertex needs 3 coordinates, found {}", fields.len())));
                    }
                    let mut xyz = [T::zero(); 3];
                    for (slot, tok) in xyz.iter_mut().zip(&fields) {
                        let value: f64 = tok
                            .parse()
                            .map_err(|_| parse_err(format!("invalid coordinate {tok:?}")))?;
                        if !value.is_finite() {
                            return Err(parse_err(format!("non-finite coordinate {tok:?}")));
                        }
                        *slot = T::of(value);
                    }
                    vertices.push(Vec3::from(xyz));
                }
                "f" => {
                    if fields.len() != 3 {
                        return Err(parse_err(format!("face needs 3 vertex indices, found {}", fields.len())));
                    }
                    let mut tri = [0usize; 3];
                    for (slot, tok) in tri.iter_mut().zip(&fields) {
                        let one_based: usize = tok
                            .parse()
                            .map_err(|_| parse_err(format!("invalid vertex index {tok:?}")))?;
                        if one_based == 0 {
                            return Err(parse_err("vertex indices are 1-based; found 0".into()));
                        }
                        *slot = one_based - 1;
                    }
                    triangles.push(tri);
                    face_lines.push(line);
                }
                other => return Err(parse_err(format!("unsupported line type {other:?}"))),
            }
        }
        Self::validated(vertices, triangles, Some(&face_lines))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serializes to the text format accepted by [`SurfaceMesh::parse`].
    /// Coordinates use the shortest representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64());
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| GeometryError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle(&self, index: usize) -> [Vec3<T>; 3] {
        let t = self.triangles[index];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn edge(&self, index: usize) -> (Vec3<T>, Vec3<T>) {
        let e = self.edges[index];
        (self.vertices[e[0]], self.vertices[e[1]])
    }

    pub fn triangle_area(&self, index: usize) -> T {
        let [a, b, c] = self.triangle(index);
        triangle_area(a, b, c)
    }

    pub fn surface_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Area-weighted centroid of the surface.
    pub fn centroid(&self) -> Vec3<T> {
        let mut acc = Vec3::zero();
        let mut total = T::zero();
        let three = T::of(3.0);
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let area = triangle_area(a, b, c);
            acc += (a + b + c) * (area / three);
            total = total + area;
        }
        acc * (T::one() / total)
    }

    /// Axis-aligned bounding box `(min, max)` of the vertices.
    pub fn bounding_box(&self) -> (Vec3<T>, Vec3<T>) {
        let first = self.vertices[self.triangles[0][0]];
        self.vertices
            .iter()
            .fold((first, first), |(lo, hi), &v| (lo.component_min(v), hi.component_max(v)))
    }

    /// Exact closest point on the mesh surface, by scanning every triangle.
    pub fn closest_point(&self, query: Vec3<T>) -> (Vec3<T>, T) {
        let mut best = (self.vertices[self.triangles[0][0]], T::infinity());
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let p = closest_point_on_triangle(query, a, b, c);
            let d2 = query.distance_squared(p);
            if d2 < best.1 {
                best = (p, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn distance_to_surface(&self, query: Vec3<T>) -> T {
        self.closest_point(query).1
    }

    /// Nearest intersection of a ray with the mesh, as `(t, point)` with
    /// `point = origin + dir * t`, `t > 0`.
    pub fn ray_cast(&self, origin: Vec3<T>, dir: Vec3<T>) -> Option<(T, Vec3<T>)> {
        let mut best: Option<T> = None;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            if let Some(hit) = ray_triangle_intersection(origin, dir, a, b, c) {
                if best.is_none_or(|b| hit < b) {
                    best = Some(hit);
                }
            }
        }
        best.map(|t| (t, origin + dir * t))
    }
}

pub(crate) fn triangle_area<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> T {
    (b - a).cross(c - a).norm() * T::of(0.5)
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle<T: Real>(p: Vec3<T>, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Vec3<T> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    let zero = T::zero();
    if d1 <= zero && d2 <= zero {
        return a;
    }

    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= zero && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= zero && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore ray/triangle test. Returns the ray parameter of the hit
/// when it is strictly positive.
pub fn ray_triangle_intersection<T: Real>(
    origin: Vec3<T>,
    dir: Vec3<T>,
    a: Vec3<T>,
    b: Vec3<T>,
    c: Vec3<T>,
) -> Option<T> {
    let eps = T::of(1e-12);
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(e2);
    let det = e1.dot(h);
    if det.abs() < eps {
        return None;
    }
    let inv = T::one() / det;
    let s = origin - a;
    let u = s.dot(h) * inv;
    let tol = T::of(1e-12);
    if u < -tol || u > T::one() + tol {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -tol || u + v > T::one() + tol {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > eps).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TRIANGLE: &str = "# unit triangle\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";

    #[test]
    fn single_triangle_has_three_edges() {
        let mesh = SurfaceMesh::<f64>::parse(ONE_TRIANGLE).unwrap();
        assert_eq!(mesh.vertices().len(), 3);
        assert_eq!(mesh.triangles().len(), 1);
        assert_eq!(mesh.edges(), &[[0, 1], [0, 2], [1, 2]]);
    }

    #[test]
    fn shared_edges_are_deduplicated() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n";
        let mesh = SurfaceMesh::<f64>::parse(text).unwrap();
        assert_eq!(mesh.edges().len(), 5);
    }

    #[test]
    fn out_of_range_index_names_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 5\n";
        let err = SurfaceMesh::<f64>::parse(text).unwrap_err();
        match err {
            GeometryError::IndexOutOfRange { line, index, count, .. } => {
                assert_eq!(line, Some(5));
                assert_eq!(index, 4);
                assert_eq!(count, 3);
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(SurfaceMesh::<f64>::parse(text).unwrap_err().to_string().starts_with("line 5:"));
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n";
        assert!(matches!(
            SurfaceMesh::<f64>::parse(text),
            Err(GeometryError::DegenerateTriangle { line: Some(4), triangle: 0, .. })
        ));
    }

    #[test]
    fn malformed_lines_rejected() {
        for (text, line) in [
            ("v 0 0\n", 1),
            ("v 0 0 0\nv 1 x 0\n", 2),
            ("v 0 0 0\nvn 0 0 1\n", 2),
            ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", 4),
            ("v 0 0 nan\n", 1),
        ] {
            match SurfaceMesh::<f64>::parse(text) {
                Err(GeometryError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mesh = SurfaceMesh::<f64>::parse("v 0.1 0 0\nv 1 0.3 0\nv 0 1 1e-3\nf 1 2 3\n").unwrap();
        let again = SurfaceMesh::<f64>::parse(&mesh.to_text()).unwrap();
        assert_eq!(mesh, again);
    }

    #[test]
    fn closest_point_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(2.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 2.0, 0.0);
        // interior: drops straight down
        assert_eq!(closest_point_on_triangle(Vec3::new(0.5, 0.5, 3.0), a, b, c), Vec3::new(0.5, 0.5, 0.0));
        // vertex region
        assert_eq!(closest_point_on_triangle(Vec3::new(-1.0, -1.0, 0.0), a, b, c), a);
        // hypotenuse edge
        let p = closest_point_on_triangle(Vec3::new(2.0, 2.0, 0.0), a, b, c);
        assert!(p.distance(Vec3::new(1.0, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn ray_hits_triangle() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(2.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 2.0, 0.0);
        let t = ray_triangle_intersection(Vec3::new(0.5, 0.5, 4.0), Vec3::new(0.0, 0.0, -1.0), a, b, c);
        assert_eq!(t, Some(4.0));
        assert!(ray_triangle_intersection(Vec3::new(3.0, 3.0, 4.0), Vec3::new(0.0, 0.0, -1.0), a, b, c).is_none());
    }

    #[test]
    fn generic_over_f32() {
        let mesh = SurfaceMesh::<f32>::parse(ONE_TRIANGLE).unwrap();
        assert!((mesh.surface_area() - 0.5).abs() < 1e-7);
    }
}
