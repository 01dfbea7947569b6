//! Triangle meshes and segment/surface crossing queries.

mod index;
mod intersect;
mod io;

use crate::error::{Error, Result};
use crate::volume::Point3;

pub use index::MeshIndex;
pub use intersect::{segment_hits_triangle, EPSILON};
pub use io::{load_surface, read_freesurfer, read_off, write_freesurfer, write_off};

/// Triangles with an area at or below this (mm²) are dropped on load.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    dropped: usize,
}

impl TriangleMesh {
    /// Validates indices and coordinates, then drops degenerate triangles.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Data("mesh has non-finite vertex coordinates".into()));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Data(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        let before = triangles.len();
        let triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| triangle_area(&vertices, t) > MIN_TRIANGLE_AREA)
            .collect();
        let dropped = before - triangles.len();
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles");
        }
        Ok(Self {
            vertices,
            triangles,
            dropped,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Number of degenerate triangles removed at construction.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn translated(&self, by: Point3) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + by[0], v[1] + by[1], v[2] + by[2]])
                .collect(),
            triangles: self.triangles.clone(),
            dropped: self.dropped,
        }
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.triangles.is_empty() {
            return 0.0;
        }
        let total: f64 = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                dist(a, b) + dist(b, c) + dist(c, a)
            })
            .sum();
        total / (3 * self.triangles.len()) as f64
    }

    /// Brute-force crossing test against every triangle.
    pub fn segment_intersects_brute(&self, p: Point3, q: Point3) -> bool {
        (0..self.triangles.len()).any(|t| segment_hits_triangle(p, q, self.corners(t)))
    }
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

fn triangle_area(vertices: &[Point3], t: &[u32; 3]) -> f64 {
    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
        return 0.0;
    }
    let [a, b, c] = t.map(|i| vertices[i as usize]);
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}
