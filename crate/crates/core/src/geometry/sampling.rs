use rand::Rng;

use super::{discretize_surface, GeometryError, SurfaceMesh, Vec3};
use crate::Real;

/// Spacing of the dense discretization that even-spacing sampling
/// subsamples from.
pub const EVEN_SPACING_DENSE_MM: f64 = 2.0;

/// Point at parameter `t` along edge `edge` (`t = 0` is the lower-index vertex).
pub fn point_on_edge<T: Real>(mesh: &SurfaceMesh<T>, edge: usize, t: T) -> Vec3<T> {
    let (a, b) = mesh.edge(edge);
    a.lerp(b, t)
}

/// Picks an edge uniformly from the edge list, then a point uniformly along it.
///
/// Edges are not length-weighted: every edge is equally likely regardless of
/// its length.
pub fn sample_random_edge_point<T: Real, R: Rng + ?Sized>(
    mesh: &SurfaceMesh<T>,
    rng: &mut R,
) -> Result<Vec3<T>, GeometryError> {
    let n = mesh.edges().len();
    if n == 0 {
        return Err(GeometryError::NoEdges);
    }
    let edge = rng.random_range(0..n);
    let t: f64 = rng.random();
    Ok(point_on_edge(mesh, edge, T::of(t)))
}

/// `n` near-uniform surface points by farthest-point subsampling of a dense
/// discretization at [`EVEN_SPACING_DENSE_MM`].
pub fn sample_even_spacing<T: Real>(mesh: &SurfaceMesh<T>, n: usize) -> Result<Vec<Vec3<T>>, GeometryError> {
    sample_even_spacing_with(mesh, n, T::of(EVEN_SPACING_DENSE_MM))
}

/// Greedy max-min subsampling: start from the dense point nearest the
/// area-weighted centroid, then repeatedly add the dense point farthest from
/// everything chosen so far (lowest index on ties).
///
/// The output for `n` is always a prefix of the output for any larger `n`.
pub fn sample_even_spacing_with<T: Real>(
    mesh: &SurfaceMesh<T>,
    n: usize,
    dense_spacing: T,
) -> Result<Vec<Vec3<T>>, GeometryError> {
    if n < 1 {
        return Err(GeometryError::InvalidCount { requested: n });
    }
    let dense = discretize_surface(mesh, dense_spacing)?;
    if dense.len() < n {
        return Err(GeometryError::TooFewCandidates {
            requested: n,
            available: dense.len(),
        });
    }
    let points = dense.points();
    let first = dense.nearest(mesh.centroid())?.index;

    let mut chosen = Vec::with_capacity(n);
    chosen.push(points[first]);
    let mut gap: Vec<T> = points.iter().map(|p| p.distance_squared(points[first])).collect();
    while chosen.len() < n {
        let mut pick = 0;
        for (i, &g) in gap.iter().enumerate() {
            if g > gap[pick] {
                pick = i;
            }
        }
        let p = points[pick];
        chosen.push(p);
        for (g, q) in gap.iter_mut().zip(points) {
            let d = q.distance_squared(p);
            if d < *g {
                *g = d;
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Yields `1 << 63` forever, which makes `random::<f64>()` exactly 0.5.
    struct HalfRng;

    impl RngCore for HalfRng {
        fn next_u32(&mut self) -> u32 {
            1 << 31
        }
        fn next_u64(&mut self) -> u64 {
            1 << 63
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0);
        }
    }

    fn single_edge_mesh() -> SurfaceMesh<f64> {
        SurfaceMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(10.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn half_draw_gives_midpoint() {
        assert_eq!(HalfRng.random::<f64>(), 0.5);
        let mesh = single_edge_mesh();
        // the constant stream selects the middle of the three sorted edges,
        // which is (0,0,0)-(10,0,0)
        assert_eq!(mesh.edges()[1], [0, 2]);
        let p = sample_random_edge_point(&mesh, &mut HalfRng).unwrap();
        assert_eq!(p, Vec3::new(5.0, 0.0, 0.0));
    }

    #[test]
    fn even_spacing_rejects_zero() {
        let mesh = single_edge_mesh();
        assert!(matches!(
            sample_even_spacing(&mesh, 0),
            Err(GeometryError::InvalidCount { requested: 0 })
        ));
    }

    #[test]
    fn even_spacing_is_prefix_stable() {
        let mesh = single_edge_mesh();
        let a = sample_even_spacing_with(&mesh, 5, 0.5).unwrap();
        let b = sample_even_spacing_with(&mesh, 12, 0.5).unwrap();
        assert_eq!(&b[..5], &a[..]);
    }

    #[test]
    fn too_many_points_requested() {
        let mesh = single_edge_mesh();
        assert!(matches!(
            sample_even_spacing_with(&mesh, 1000, 5.0),
            Err(GeometryError::TooFewCandidates { .. })
        ));
    }

    #[test]
    fn random_edge_points_reproducible() {
        let mesh = single_edge_mesh();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10)
                .map(|_| sample_random_edge_point(&mesh, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }
}
