//! Uniform-grid acceleration structure over mesh triangles.
//!
//! Each triangle is registered in every cell overlapped by its (slightly
//! padded) bounding box. A segment query visits the cells overlapped by the
//! segment's bounding box. Both sides use the same clamped `floor` mapping,
//! so any crossing point lies in a cell reached from both, which makes the
//! query result independent of the cell size.

use super::{segment_hits_triangle, TriangleMesh};
use crate::error::{invalid, Result};
use crate::volume::Point3;

const MAX_CELLS: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct MeshIndex {
    mesh: TriangleMesh,
    corners: Vec<[Point3; 3]>,
    origin: Point3,
    upper: Point3,
    cell: f64,
    dims: [usize; 3],
    /// CSR layout: triangles of cell `c` are `items[starts[c]..starts[c + 1]]`.
    starts: Vec<u32>,
    items: Vec<u32>,
    pad: f64,
}

impl MeshIndex {
    /// Index with the default cell size, twice the mean edge length.
    pub fn build(mesh: TriangleMesh) -> Result<Self> {
        let cell = 2.0 * mesh.mean_edge_length();
        Self::with_cell_size(mesh, cell)
    }

    pub fn with_cell_size(mesh: TriangleMesh, cell_size: f64) -> Result<Self> {
        if mesh.triangles().is_empty() {
            return Err(invalid("cannot index a mesh without triangles"));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(invalid(format!("cell size must be positive, got {cell_size}")));
        }
        let corners: Vec<[Point3; 3]> = (0..mesh.triangles().len()).map(|t| mesh.corners(t)).collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in corners.iter().flatten() {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let pad = 1e-7 * (extent + cell_size);
        for a in 0..3 {
            lo[a] -= pad;
            hi[a] += pad;
        }

        let mut cell = cell_size;
        let dims = loop {
            let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).ceil() as usize).max(1));
            if dims.iter().product::<usize>() <= MAX_CELLS {
                break dims;
            }
            cell *= 2.0;
        };

        let mut index = Self {
            mesh,
            corners,
            origin: lo,
            upper: hi,
            cell,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
            pad,
        };
        index.fill();
        Ok(index)
    }

    fn cell_range(&self, lo: Point3, hi: Point3) -> [[usize; 2]; 3] {
        [0, 1, 2].map(|a| [self.axis_cell(a, lo[a]), self.axis_cell(a, hi[a])])
    }

    #[inline]
    fn axis_cell(&self, a: usize, x: f64) -> usize {
        let c = ((x - self.origin[a]) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[a] - 1)
        }
    }

    fn triangle_box(&self, t: usize) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.corners[t] {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a] - self.pad);
                hi[a] = hi[a].max(v[a] + self.pad);
            }
        }
        (lo, hi)
    }

    fn fill(&mut self) {
        let ncells: usize = self.dims.iter().product();
        let ranges: Vec<[[usize; 2]; 3]> = (0..self.corners.len())
            .map(|t| {
                let (lo, hi) = self.triangle_box(t);
                self.cell_range(lo, hi)
            })
            .collect();
        let mut counts = vec![0u32; ncells + 1];
        for r in &ranges {
            self.for_cells(r, |c| counts[c + 1] += 1);
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let mut cursor = counts.clone();
        let mut items = vec![0u32; counts[ncells] as usize];
        for (t, r) in ranges.iter().enumerate() {
            self.for_cells(r, |c| {
                items[cursor[c] as usize] = t as u32;
                cursor[c] += 1;
            });
        }
        self.starts = counts;
        self.items = items;
    }

    fn for_cells(&self, r: &[[usize; 2]; 3], mut f: impl FnMut(usize)) {
        for k in r[2][0]..=r[2][1] {
            for j in r[1][0]..=r[1][1] {
                for i in r[0][0]..=r[0][1] {
                    f(i + self.dims[0] * (j + self.dims[1] * k));
                }
            }
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// True iff the open segment `(p, q)` crosses some triangle.
    pub fn segment_intersects(&self, p: Point3, q: Point3) -> bool {
        let lo = [0, 1, 2].map(|a| p[a].min(q[a]) - self.pad);
        let hi = [0, 1, 2].map(|a| p[a].max(q[a]) + self.pad);
        if (0..3).any(|a| hi[a] < self.origin[a] || lo[a] > self.upper[a]) {
            return false;
        }
        let r = self.cell_range(lo, hi);
        for k in r[2][0]..=r[2][1] {
            for j in r[1][0]..=r[1][1] {
                for i in r[0][0]..=r[0][1] {
                    let c = i + self.dims[0] * (j + self.dims[1] * k);
                    let cell = &self.items[self.starts[c] as usize..self.starts[c + 1] as usize];
                    if cell
                        .iter()
                        .any(|&t| segment_hits_triangle(p, q, self.corners[t as usize]))
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> TriangleMesh {
        TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    /// UV sphere, used for bounding-box and parity checks.
    pub(crate) fn sphere(radius: f64, rings: usize, sectors: usize) -> TriangleMesh {
        let mut v = vec![[0.0, 0.0, radius]];
        for r in 1..rings {
            let th = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..sectors {
                let ph = 2.0 * std::f64::consts::PI * s as f64 / sectors as f64;
                v.push([radius * th.sin() * ph.cos(), radius * th.sin() * ph.sin(), radius * th.cos()]);
            }
        }
        v.push([0.0, 0.0, -radius]);
        let south = (v.len() - 1) as u32;
        let ring = |r: usize, s: usize| (1 + (r - 1) * sectors + s % sectors) as u32;
        let mut t = Vec::new();
        for s in 0..sectors {
            t.push([0, ring(1, s), ring(1, s + 1)]);
            t.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
        }
        for r in 1..rings - 1 {
            for s in 0..sectors {
                t.push([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)]);
                t.push([ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)]);
            }
        }
        TriangleMesh::new(v, t).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point3 {
        [0; 3].map(|_| rng.random_range(lo..hi))
    }

    #[test]
    fn square_parity_on_random_segments() {
        let idx = MeshIndex::build(unit_square()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = 0;
        for _ in 0..1000 {
            let p = random_point(&mut rng, -1.0, 2.0);
            let q = random_point(&mut rng, -1.0, 2.0);
            let expect = idx.mesh().segment_intersects_brute(p, q);
            assert_eq!(idx.segment_intersects(p, q), expect);
            hits += expect as usize;
        }
        assert!(hits > 50);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let m = TriangleMesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 2]]).unwrap();
        assert!(MeshIndex::build(m).is_err());
    }

    #[test]
    fn sphere_segments_outside_bbox_miss() {
        let idx = MeshIndex::build(sphere(5.0, 12, 16)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = random_point(&mut rng, 6.0, 20.0);
            let q = random_point(&mut rng, 6.0, 20.0);
            assert!(!idx.segment_intersects(p, q));
        }
    }

    #[test]
    fn sphere_parity_across_cell_sizes() {
        let mesh = sphere(5.0, 10, 14);
        let indices: Vec<MeshIndex> = [0.3, 1.0, 2.0 * mesh.mean_edge_length(), 50.0]
            .iter()
            .map(|&c| MeshIndex::with_cell_size(mesh.clone(), c).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = random_point(&mut rng, -7.0, 7.0);
            let len = rng.random_range(0.1..4.0);
            let q = [0, 1, 2].map(|a| p[a] + len * rng.random_range(-1.0..1.0));
            let expect = mesh.segment_intersects_brute(p, q);
            for idx in &indices {
                assert_eq!(idx.segment_intersects(p, q), expect);
            }
        }
    }
}
