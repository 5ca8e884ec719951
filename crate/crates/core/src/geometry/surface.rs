use super::{GeometryError, SurfaceMesh, Vec3};
use crate::Real;

/// Upper bound on the number of points [`discretize_surface`] will emit.
const MAX_POINTS: usize = 20_000_000;

/// Discrete points on the skin surface, used to snap network outputs onto
/// the skin.
///
/// Carries a uniform-grid index so that projection is sub-linear; the index is
/// rebuilt from the points and never serialized.
#[derive(Debug, Clone)]
pub struct SurfacePointSet<T> {
    points: Vec<Vec3<T>>,
    spacing: T,
    index: Option<GridIndex<T>>,
}

impl<T: Real> PartialEq for SurfacePointSet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.spacing == other.spacing
    }
}

/// Result of snapping a query onto a [`SurfacePointSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceProjection<T> {
    pub index: usize,
    pub point: Vec3<T>,
    pub distance: T,
}

impl<T: Real> SurfacePointSet<T> {
    /// Wraps an ordered point list. `spacing` records the target spacing the
    /// points were generated with.
    pub fn new(points: Vec<Vec3<T>>, spacing: T) -> Self {
        let index = GridIndex::build(&points, spacing);
        Self { points, spacing, index }
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest element to `query`; ties go to the lowest index.
    pub fn nearest(&self, query: Vec3<T>) -> Result<SurfaceProjection<T>, GeometryError> {
        if self.points.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        if !query.is_finite() {
            return Err(GeometryError::NonFiniteQuery);
        }
        let (index, d2) = match &self.index {
            Some(grid) => grid.nearest(&self.points, query),
            None => linear_nearest(&self.points, query),
        };
        Ok(SurfaceProjection {
            index,
            point: self.points[index],
            distance: d2.sqrt(),
        })
    }
}

/// Snaps `query` to the closest point of `set` (lowest index on ties).
pub fn nearest_surface_point<T: Real>(
    query: Vec3<T>,
    set: &SurfacePointSet<T>,
) -> Result<SurfaceProjection<T>, GeometryError> {
    set.nearest(query)
}

/// Discretizes every triangle into a barycentric grid of resolution
/// `ceil(longest_edge / spacing)` and emits the centroid of each grid cell.
///
/// Cells have longest edge at most `spacing`, so every surface location lies
/// within `2/3 * spacing` of an emitted point. Order is by triangle, then by
/// grid row `i`, column `j`, upward cell before downward cell.
pub fn discretize_surface<T: Real>(mesh: &SurfaceMesh<T>, spacing: T) -> Result<SurfacePointSet<T>, GeometryError> {
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(GeometryError::InvalidSpacing(spacing.as_f64()));
    }

    let resolutions: Vec<usize> = (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            let longest = a.distance(b).max(b.distance(c)).max(c.distance(a));
            let res = (longest / spacing).ceil().as_f64();
            if res.is_finite() && res < MAX_POINTS as f64 {
                Ok((res as usize).max(1))
            } else {
                Err(GeometryError::TooDense { limit: MAX_POINTS })
            }
        })
        .collect::<Result<_, _>>()?;
    let total: usize = resolutions.iter().map(|r| r * r).sum();
    if total > MAX_POINTS {
        return Err(GeometryError::TooDense { limit: MAX_POINTS });
    }

    let third = T::of(1.0 / 3.0);
    let two_thirds = T::of(2.0 / 3.0);
    let mut points = Vec::with_capacity(total);
    for (t, &res) in resolutions.iter().enumerate() {
        let [a, b, c] = mesh.triangle(t);
        let ab = b - a;
        let ac = c - a;
        let n = T::of(res as f64);
        let at = |u: T, v: T| a + ab * (u / n) + ac * (v / n);
        for i in 0..res {
            let fi = T::of(i as f64);
            for j in 0..res - i {
                let fj = T::of(j as f64);
                points.push(at(fi + third, fj + third));
                if i + j + 1 < res {
                    points.push(at(fi + two_thirds, fj + two_thirds));
                }
            }
        }
    }
    Ok(SurfacePointSet::new(points, spacing))
}

fn linear_nearest<T: Real>(points: &[Vec3<T>], query: Vec3<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (i, p) in points.iter().enumerate() {
        let d2 = query.distance_squared(*p);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

/// Uniform grid over the point set's bounding box, stored in CSR form.
#[derive(Debug, Clone)]
struct GridIndex<T> {
    origin: Vec3<T>,
    cell: T,
    dims: [i64; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<T: Real> GridIndex<T> {
    fn build(points: &[Vec3<T>], spacing: T) -> Option<Self> {
        if points.len() < 64 || points.len() > u32::MAX as usize {
            return None;
        }
        let (lo, hi) = points
            .iter()
            .fold((points[0], points[0]), |(lo, hi), &p| (lo.component_min(p), hi.component_max(p)));
        let extent = hi - lo;
        let largest = extent.x.max(extent.y).max(extent.z).as_f64();
        if !(largest > 0.0) {
            return None;
        }
        let max_cells = (points.len() * 4 + 64) as f64;
        let mut cell = if spacing > T::zero() && spacing.is_finite() {
            2.0 * spacing.as_f64()
        } else {
            largest / 16.0
        };
        cell = cell.max(largest / 1024.0);
        let dims = loop {
            let d = [extent.x, extent.y, extent.z].map(|e| (e.as_f64() / cell).floor() as i64 + 1);
            if (d[0] * d[1] * d[2]) as f64 <= max_cells {
                break d;
            }
            cell *= 1.25;
        };
        let cell = T::of(cell);

        let mut grid = Self {
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let n_cells = (dims[0] * dims[1] * dims[2]) as usize;
        let slots: Vec<usize> = points.iter().map(|&p| grid.slot(grid.clamped_coords(p))).collect();
        let mut counts = vec![0u32; n_cells + 1];
        for &s in &slots {
            counts[s + 1] += 1;
        }
        for k in 0..n_cells {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, &s) in slots.iter().enumerate() {
            items[fill[s] as usize] = i as u32;
            fill[s] += 1;
        }
        grid.starts = counts;
        grid.items = items;
        Some(grid)
    }

    fn coords(&self, p: Vec3<T>) -> [i64; 3] {
        let rel = p - self.origin;
        [rel.x, rel.y, rel.z].map(|r| (r / self.cell).floor().as_f64() as i64)
    }

    fn clamped_coords(&self, p: Vec3<T>) -> [i64; 3] {
        let c = self.coords(p);
        [0, 1, 2].map(|a| c[a].clamp(0, self.dims[a] - 1))
    }

    fn slot(&self, c: [i64; 3]) -> usize {
        ((c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]) as usize
    }

    fn nearest(&self, points: &[Vec3<T>], query: Vec3<T>) -> (usize, T) {
        let qc = self.coords(query);
        let outside = (0..3).any(|a| qc[a] < 0 || qc[a] >= self.dims[a]);
        if outside {
            return linear_nearest(points, query);
        }
        let r_max = (0..3).map(|a| qc[a].max(self.dims[a] - 1 - qc[a])).max().unwrap_or(0);

        let mut best_idx = usize::MAX;
        let mut best_d2 = T::infinity();
        let shrink = T::of(1.0 - 1e-9);
        for r in 0..=r_max {
            if r >= 1 && best_idx != usize::MAX {
                // Unvisited cells are at Chebyshev ring >= r, so at least
                // (r - 1) cells away along some axis.
                let bound = T::of((r - 1) as f64) * self.cell * shrink;
                if best_d2 < bound * bound {
                    break;
                }
            }
            self.visit_ring(qc, r, |slot| {
                let (s, e) = (self.starts[slot] as usize, self.starts[slot + 1] as usize);
                for &item in &self.items[s..e] {
                    let i = item as usize;
                    let d2 = query.distance_squared(points[i]);
                    if d2 < best_d2 || (d2 == best_d2 && i < best_idx) {
                        best_d2 = d2;
                        best_idx = i;
                    }
                }
            });
        }
        (best_idx, best_d2)
    }

    fn visit_ring(&self, qc: [i64; 3], r: i64, mut f: impl FnMut(usize)) {
        let range = |a: usize| ((qc[a] - r).max(0), (qc[a] + r).min(self.dims[a] - 1));
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for z in z0..=z1 {
            let dz = (z - qc[2]).abs();
            for y in y0..=y1 {
                let dy = (y - qc[1]).abs();
                if dz == r || dy == r {
                    for x in x0..=x1 {
                        f(self.slot([x, y, z]));
                    }
                } else {
                    for x in [qc[0] - r, qc[0] + r] {
                        if x >= x0 && x <= x1 {
                            f(self.slot([x, y, z]));
                        }
                        if r == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }
}
