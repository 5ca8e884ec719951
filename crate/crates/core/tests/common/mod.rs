#![allow(dead_code)]

use capskin::geometry::{semicone_mesh, SemiconeSpec};
use capskin::{Mesh, Vec3f};
use rand::Rng;

pub fn semicone() -> Mesh {
    semicone_mesh(&SemiconeSpec::default()).unwrap()
}

pub fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Exhaustive nearest point; the first index wins ties.
pub fn brute_nearest(points: &[Vec3f], q: Vec3f) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = d2(p.to_array(), q.to_array());
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Distance from `p` to the segment `ab`.
pub fn segment_distance(p: Vec3f, a: Vec3f, b: Vec3f) -> f64 {
    let ab = [b.x - a.x, b.y - a.y, b.z - a.z];
    let ap = [p.x - a.x, p.y - a.y, p.z - a.z];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0);
    let c = [a.x + t * ab[0], a.y + t * ab[1], a.z + t * ab[2]];
    d2(p.to_array(), c).sqrt()
}

fn area(t: [Vec3f; 3]) -> f64 {
    (t[1] - t[0]).cross(t[2] - t[0]).norm() / 2.0
}

/// Area-weighted uniform point on the mesh surface.
pub fn random_surface_point<R: Rng>(mesh: &Mesh, rng: &mut R) -> Vec3f {
    let areas: Vec<f64> = (0..mesh.triangles().len()).map(|i| area(mesh.triangle(i))).collect();
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut tri = areas.len() - 1;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            tri = i;
            break;
        }
        pick -= a;
    }
    let [a, b, c] = mesh.triangle(tri);
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    a + (b - a) * u + (c - a) * v
}
