use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::spectral::SpectralSlice;
use crate::surface::TriangleMesh;
use crate::volume::{enforce_6connectivity, BinaryMask, Point3, VolumeGeometry};

/// Synthetic mask with an optional surface and its known answers.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub mask: BinaryMask,
    pub surface: Option<TriangleMesh>,
    /// Voxel pairs `(a, b)`, `a < b`, whose edges the surface cuts.
    pub crossing_edges: Vec<[usize; 2]>,
    /// Connected components expected after pruning.
    pub components: usize,
}

/// Geometry of a two-sheet phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedSheet {
    /// In-plane sheet size in voxels.
    pub extent: [usize; 2],
    /// Empty voxel layers between the sheets.
    pub gap: usize,
    pub spacing: [f64; 3],
    pub origin: Point3,
    /// Position of the separating plane between the sheet centres, in (0, 1).
    pub plane_fraction: f64,
}

impl FoldedSheet {
    pub fn new(extent: [usize; 2], gap: usize, spacing: [f64; 3]) -> Self {
        Self {
            extent,
            gap,
            spacing,
            origin: [0.0; 3],
            plane_fraction: 0.5,
        }
    }
}

/// Two parallel one-voxel sheets with a plane between them, standing in for
/// two sulcal banks and the pial surface that separates them.
pub fn make_folded_sheet(sheet: &FoldedSheet) -> Result<Phantom> {
    let [nx, ny] = sheet.extent;
    if nx < 2 || ny < 2 {
        return Err(invalid("sheets must be at least 2 x 2 voxels"));
    }
    if !(sheet.plane_fraction > 0.0 && sheet.plane_fraction < 1.0) {
        return Err(invalid("plane must lie strictly between the sheets"));
    }
    let (z0, z1) = (1, 2 + sheet.gap);
    let dims = [nx + 2, ny + 2, z1 + 2];
    let geometry = VolumeGeometry::axis_aligned(dims, sheet.spacing, sheet.origin)?;
    let in_sheet = |[x, y, _]: [usize; 3]| (1..=nx).contains(&x) && (1..=ny).contains(&y);
    let mask = BinaryMask::from_fn(geometry.clone(), |c| in_sheet(c) && (c[2] == z0 || c[2] == z1));

    let zc = |z: usize| sheet.origin[2] + z as f64 * sheet.spacing[2];
    let plane_z = zc(z0) + sheet.plane_fraction * (zc(z1) - zc(z0));
    let lo = [sheet.origin[0] - sheet.spacing[0], sheet.origin[1] - sheet.spacing[1]];
    let hi = [
        sheet.origin[0] + (nx + 2) as f64 * sheet.spacing[0],
        sheet.origin[1] + (ny + 2) as f64 * sheet.spacing[1],
    ];
    let surface = TriangleMesh::new(
        vec![[lo[0], lo[1], plane_z], [hi[0], lo[1], plane_z], [hi[0], hi[1], plane_z], [lo[0], hi[1], plane_z]],
        vec![[0, 1, 2], [0, 2, 3]],
    )?;

    let mut crossing_edges = Vec::new();
    if sheet.gap == 0 {
        for y in 1..=ny {
            for x in 1..=nx {
                let a = geometry.linear_index([x, y, z0]);
                for yy in y.saturating_sub(1).max(1)..=(y + 1).min(ny) {
                    for xx in x.saturating_sub(1).max(1)..=(x + 1).min(nx) {
                        crossing_edges.push([a, geometry.linear_index([xx, yy, z1])]);
                    }
                }
            }
        }
        crossing_edges.sort_unstable();
    }
    Ok(Phantom {
        mask,
        surface: Some(surface),
        crossing_edges,
        components: 2,
    })
}

/// Spherical shell of voxels whose centres lie at distance
/// `[radius - thickness, radius)` (in voxels) from the lattice centre.
pub fn make_shell(radius: f64, thickness: f64, spacing: [f64; 3]) -> Result<Phantom> {
    if !(thickness >= 1.0 && radius > thickness && radius.is_finite()) {
        return Err(invalid(format!("need radius > thickness >= 1, got {radius} and {thickness}")));
    }
    let side = 2 * radius.ceil() as usize + 3;
    let geometry = VolumeGeometry::axis_aligned([side; 3], spacing, [0.0; 3])?;
    let c = (side - 1) as f64 / 2.0;
    let inner = radius - thickness;
    let raw = BinaryMask::from_fn(geometry, |[x, y, z]| {
        let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2)).sqrt();
        d >= inner && d < radius
    });
    Ok(Phantom {
        mask: enforce_6connectivity(&raw),
        surface: None,
        crossing_edges: Vec::new(),
        components: 1,
    })
}

/// Closed UV sphere with `rings` latitude bands and `sectors` longitudes.
pub fn uv_sphere(center: Point3, radius: f64, rings: usize, sectors: usize) -> Result<TriangleMesh> {
    if rings < 2 || sectors < 3 {
        return Err(invalid("sphere needs at least 2 rings and 3 sectors"));
    }
    use std::f64::consts::PI;
    let mut v = vec![[center[0], center[1], center[2] + radius]];
    for r in 1..rings {
        let th = PI * r as f64 / rings as f64;
        for s in 0..sectors {
            let ph = 2.0 * PI * s as f64 / sectors as f64;
            v.push([
                center[0] + radius * th.sin() * ph.cos(),
                center[1] + radius * th.sin() * ph.sin(),
                center[2] + radius * th.cos(),
            ]);
        }
    }
    v.push([center[0], center[1], center[2] - radius]);
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
    TriangleMesh::new(v, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    /// The `k`-th eigenvector (1-based).
    Eigenmode(usize),
    /// White noise projected onto eigenmodes with eigenvalue in `[low, high]`.
    BandLimited { low: f64, high: f64 },
    /// Seeded standard-normal noise.
    WhiteNoise,
}

/// Deterministic test signal on an `n`-vertex graph.
pub fn make_signal(kind: SignalKind, n: usize, slice: Option<&SpectralSlice>, seed: u64) -> Result<Vec<f64>> {
    let noise = |n: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>()
    };
    let need_slice = || {
        let s = slice.ok_or_else(|| invalid("this signal kind needs eigenpairs"))?;
        if s.dim() != n {
            return Err(crate::error::Error::DimensionMismatch {
                expected: n,
                actual: s.dim(),
            });
        }
        Ok(s)
    };
    match kind {
        SignalKind::WhiteNoise => Ok(noise(n)),
        SignalKind::Eigenmode(k) => {
            let s = need_slice()?;
            if k == 0 || k > s.len() {
                return Err(invalid(format!("eigenmode {k} outside 1..={}", s.len())));
            }
            Ok(s.eigenvector(k - 1).to_vec())
        }
        SignalKind::BandLimited { low, high } => {
            let s = need_slice()?;
            if !(low <= high) {
                return Err(invalid("band must satisfy low <= high"));
            }
            if !s.is_full() && high > s.coverage() {
                return Err(crate::error::Error::Uncertified {
                    lambda: high,
                    coverage: s.coverage(),
                });
            }
            let w = noise(n);
            let mut out = vec![0.0; n];
            for (u, &lam) in s.eigenvectors().zip(s.eigenvalues()) {
                if lam < low || lam > high {
                    continue;
                }
                let c: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
                out.iter_mut().zip(u).for_each(|(o, x)| *o += c * x);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, connected_components, prune_graph};
    use crate::surface::MeshIndex;

    /// Inter-sheet voxel pairs by enumerating all pairs of set voxels.
    fn brute_crossings(p: &Phantom) -> Vec<[usize; 2]> {
        let g = p.mask.geometry();
        let mesh = p.surface.as_ref().unwrap();
        let set = p.mask.set_indices();
        let mut out = Vec::new();
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                let (ca, cb) = (g.voxel_coords(a), g.voxel_coords(b));
                if (0..3).all(|k| ca[k].abs_diff(cb[k]) <= 1) && mesh.segment_intersects_brute(g.center_of(a), g.center_of(b)) {
                    out.push([a, b]);
                }
            }
        }
        out
    }

    #[test]
    fn touching_sheets() {
        let p = make_folded_sheet(&FoldedSheet::new([10, 10], 0, [1.0; 3])).unwrap();
        assert_eq!(p.mask.count(), 200);
        assert_eq!(p.crossing_edges, brute_crossings(&p));
        // 10x10 interior: each voxel sees its 3x3 neighbourhood, clipped at edges.
        assert_eq!(p.crossing_edges.len(), 28 * 28);
        let graph = build_graph(&p.mask).unwrap();
        let idx = MeshIndex::build(p.surface.clone().unwrap()).unwrap();
        let (pruned, report) = prune_graph(&graph, &idx).unwrap();
        let mut removed: Vec<[usize; 2]> = report.removed_edges.iter().map(|e| e.voxels).collect();
        removed.sort_unstable();
        assert_eq!(removed, p.crossing_edges);
        assert_eq!(connected_components(&pruned).count(), 2);

        let moved = MeshIndex::build(p.surface.unwrap().translated([0.0, 0.0, 50.0])).unwrap();
        assert_eq!(prune_graph(&graph, &moved).unwrap().1.edges_removed, 0);
    }

    #[test]
    fn wide_gap_has_no_inter_sheet_edges() {
        let p = make_folded_sheet(&FoldedSheet::new([6, 5], 3, [1.0, 1.0, 1.5])).unwrap();
        assert!(p.crossing_edges.is_empty());
        let graph = build_graph(&p.mask).unwrap();
        assert_eq!(connected_components(&graph).count(), 2);
        assert!(brute_crossings(&p).is_empty());
    }

    #[test]
    fn shell_counts() {
        assert!(make_shell(2.0, 2.0, [1.0; 3]).is_err());
        let p = make_shell(12.0, 2.0, [1.0; 3]).unwrap();
        let g = p.mask.geometry();
        let c = (g.dims()[0] - 1) as f64 / 2.0;
        let direct = (0..g.len())
            .filter(|&i| {
                let v = g.voxel_coords(i);
                let d = v.iter().map(|&x| (x as f64 - c).powi(2)).sum::<f64>().sqrt();
                (10.0..12.0).contains(&d)
            })
            .count();
        assert_eq!(p.mask.count(), direct);
        let graph = build_graph(&p.mask).unwrap();
        assert_eq!(connected_components(&graph).count(), 1);
    }

    #[test]
    fn sphere_is_closed() {
        let s = uv_sphere([1.0, 2.0, 3.0], 4.0, 8, 12).unwrap();
        assert_eq!(s.triangles().len(), 2 * 12 * 7);
        // Every edge is shared by exactly two triangles.
        let mut edges = std::collections::HashMap::new();
        for t in s.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                *edges.entry((a, b)).or_insert(0) += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
    }

    #[test]
    fn signals_are_seeded() {
        let a = make_signal(SignalKind::WhiteNoise, 50, None, 7).unwrap();
        assert_eq!(a, make_signal(SignalKind::WhiteNoise, 50, None, 7).unwrap());
        assert_ne!(a, make_signal(SignalKind::WhiteNoise, 50, None, 8).unwrap());
        assert!(make_signal(SignalKind::Eigenmode(1), 50, None, 0).is_err());
    }
}
