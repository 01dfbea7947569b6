use super::{cross, dot, norm, sub};
use crate::volume::Point3;

/// Tolerance on the segment parameter and on the barycentric bounds.
pub const EPSILON: f64 = 1e-9;

/// Relative triple-product threshold below which the segment is treated as
/// parallel to the triangle plane.
const PARALLEL_TOL: f64 = 1e-12;

/// Möller–Trumbore test of the open segment `(p, q)` against a triangle.
///
/// The hit parameter must satisfy `EPSILON < t < 1 - EPSILON`, so contact at
/// either endpoint does not count. Barycentric bounds are widened by
/// `EPSILON` so that a segment through a shared mesh edge hits both faces.
/// Segments lying in the triangle plane never count.
pub fn segment_hits_triangle(p: Point3, q: Point3, tri: [Point3; 3]) -> bool {
    let d = sub(q, p);
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let h = cross(d, e2);
    let det = dot(e1, h);
    let scale = norm(d) * norm(e1) * norm(e2);
    if !(det.abs() > PARALLEL_TOL * scale) {
        return false;
    }
    let inv = 1.0 / det;
    let s = sub(p, tri[0]);
    let u = inv * dot(s, h);
    if !(-EPSILON..=1.0 + EPSILON).contains(&u) {
        return false;
    }
    let qv = cross(s, e1);
    let v = inv * dot(d, qv);
    if v < -EPSILON || u + v > 1.0 + EPSILON {
        return false;
    }
    let t = inv * dot(e2, qv);
    t > EPSILON && t < 1.0 - EPSILON
}
