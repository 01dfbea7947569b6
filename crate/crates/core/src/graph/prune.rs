use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::components::label_components;
use super::{Adjacency, VoxelGraph};
use crate::error::Result;
use crate::surface::MeshIndex;

/// Orientation of a lattice edge as seen in an axial slice: `Horizontal`
/// and `Vertical` are single-axis moves along x/y and z respectively, and
/// `Diagonal` covers every move along two or three axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionType {
    Horizontal,
    Vertical,
    Diagonal,
}

impl ConnectionType {
    pub fn classify(a: [usize; 3], b: [usize; 3]) -> Self {
        let moved: Vec<usize> = (0..3).filter(|&k| a[k] != b[k]).collect();
        match moved.as_slice() {
            [2] => Self::Vertical,
            [_] => Self::Horizontal,
            _ => Self::Diagonal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Horizontal => "horizontal",
            Self::Vertical => "vertical",
            Self::Diagonal => "diagonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrunedEdge {
    /// Linear voxel indices, `voxels[0] < voxels[1]`.
    pub voxels: [usize; 2],
    pub kind: ConnectionType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneReport {
    pub edges_before: usize,
    pub edges_removed: usize,
    pub vertices_removed: usize,
    pub components_before: usize,
    pub components_after: usize,
    pub removed_edges: Vec<PrunedEdge>,
}

/// Removes every edge whose voxel-centre segment crosses the mesh, then every
/// vertex left without neighbours.
pub fn prune_graph(graph: &VoxelGraph, index: &MeshIndex) -> Result<(VoxelGraph, PruneReport)> {
    let adj = graph.adjacency();
    let centers = graph.vertex_centers();
    let cut: Vec<Vec<u32>> = (0..graph.len())
        .into_par_iter()
        .map(|i| {
            adj.neighbours(i)
                .iter()
                .copied()
                .filter(|&j| j as usize > i && index.segment_intersects(centers[i], centers[j as usize]))
                .collect()
        })
        .collect();

    let geometry = graph.geometry();
    let mut removed_edges = Vec::new();
    let mut lists: Vec<Vec<u32>> = (0..graph.len()).map(|i| adj.neighbours(i).to_vec()).collect();
    for (i, row) in cut.iter().enumerate() {
        for &j in row {
            let j = j as usize;
            lists[i].retain(|&k| k as usize != j);
            lists[j].retain(|&k| k as usize != i);
            let voxels = [graph.vertex_to_voxel()[i], graph.vertex_to_voxel()[j]];
            removed_edges.push(PrunedEdge {
                voxels,
                kind: ConnectionType::classify(geometry.voxel_coords(voxels[0]), geometry.voxel_coords(voxels[1])),
            });
        }
    }
    let cut_adj = Adjacency::from_lists(lists);
    let keep: Vec<bool> = (0..cut_adj.len()).map(|i| cut_adj.degree(i) > 0).collect();
    let vertices_removed = keep.iter().filter(|&&k| !k).count();
    let (pruned_adj, kept) = cut_adj.induced(&keep);
    let pruned = VoxelGraph {
        adjacency: pruned_adj,
        vertex_to_voxel: kept.iter().map(|&i| graph.vertex_to_voxel()[i]).collect(),
        geometry: geometry.clone(),
    };
    let report = PruneReport {
        edges_before: graph.num_edges(),
        edges_removed: removed_edges.len(),
        vertices_removed,
        components_before: label_components(adj).count(),
        components_after: label_components(pruned.adjacency()).count(),
        removed_edges,
    };
    Ok((pruned, report))
}

/// CSV of removed edges: voxel coordinates of both ends and the connection type.
pub fn write_pruned_edges_csv(path: impl AsRef<Path>, graph: &VoxelGraph, report: &PruneReport) -> Result<()> {
    let g = graph.geometry();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "i_a,j_a,k_a,i_b,j_b,k_b,type")?;
    for e in &report.removed_edges {
        let (a, b) = (g.voxel_coords(e.voxels[0]), g.voxel_coords(e.voxels[1]));
        writeln!(w, "{},{},{},{},{},{},{}", a[0], a[1], a[2], b[0], b[1], b[2], e.kind.as_str())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, connected_components};
    use crate::surface::TriangleMesh;
    use crate::volume::{BinaryMask, VolumeGeometry};

    fn plane_z(z: f64, lo: f64, hi: f64) -> TriangleMesh {
        TriangleMesh::new(
            vec![[lo, lo, z], [hi, lo, z], [hi, hi, z], [lo, hi, z]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn sheets() -> BinaryMask {
        let g = VolumeGeometry::axis_aligned([6, 5, 4], [1.0; 3], [0.0; 3]).unwrap();
        BinaryMask::from_fn(g, |c| c[2] == 1 || c[2] == 2)
    }

    #[test]
    fn far_mesh_changes_nothing() {
        let g = build_graph(&sheets()).unwrap();
        let idx = MeshIndex::build(plane_z(50.0, 40.0, 60.0)).unwrap();
        let (p, r) = prune_graph(&g, &idx).unwrap();
        assert_eq!(p, g);
        assert_eq!((r.edges_removed, r.vertices_removed), (0, 0));
        assert_eq!((r.components_before, r.components_after), (1, 1));
    }

    #[test]
    fn plane_between_sheets_matches_brute_force() {
        let g = build_graph(&sheets()).unwrap();
        let mesh = plane_z(1.5, -1.0, 10.0);
        let idx = MeshIndex::build(mesh.clone()).unwrap();
        let (p, r) = prune_graph(&g, &idx).unwrap();
        let mut cut = 0;
        for (i, j) in g.adjacency().edges() {
            let hit = mesh.segment_intersects_brute(g.vertex_center(i), g.vertex_center(j));
            let (a, b) = (g.vertex_to_voxel()[i], g.vertex_to_voxel()[j]);
            let (pa, pb) = (p.voxel_to_vertex(a).unwrap(), p.voxel_to_vertex(b).unwrap());
            assert_eq!(p.adjacency().has_edge(pa, pb), !hit);
            let crosses = g.geometry().voxel_coords(a)[2] != g.geometry().voxel_coords(b)[2];
            assert_eq!(hit, crosses);
            cut += hit as usize;
        }
        assert_eq!(r.edges_removed, cut);
        assert_eq!(p.num_edges(), g.num_edges() - cut);
        assert_eq!(r.components_after, 2);
        assert_eq!(connected_components(&p).sizes, vec![30, 30]);
        let vertical = r.removed_edges.iter().filter(|e| e.kind == ConnectionType::Vertical).count();
        assert_eq!(vertical, 30);
    }

    #[test]
    fn lone_crossing_vertex_is_removed() {
        let g = VolumeGeometry::axis_aligned([4, 1, 3], [1.0; 3], [0.0; 3]).unwrap();
        let mask = BinaryMask::from_fn(g, |c| c[2] == 0 || (c[0] == 0 && c[2] == 1));
        let graph = build_graph(&mask).unwrap();
        let idx = MeshIndex::build(plane_z(0.5, -1.0, 5.0)).unwrap();
        let (p, r) = prune_graph(&graph, &idx).unwrap();
        assert_eq!(r.vertices_removed, 1);
        assert_eq!(r.edges_removed, 2);
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn classification() {
        assert_eq!(ConnectionType::classify([0, 0, 0], [1, 0, 0]), ConnectionType::Horizontal);
        assert_eq!(ConnectionType::classify([0, 0, 0], [0, 1, 0]), ConnectionType::Horizontal);
        assert_eq!(ConnectionType::classify([0, 0, 0], [0, 0, 1]), ConnectionType::Vertical);
        assert_eq!(ConnectionType::classify([0, 0, 0], [1, 1, 0]), ConnectionType::Diagonal);
    }

    #[test]
    fn csv_export() {
        let g = build_graph(&sheets()).unwrap();
        let idx = MeshIndex::build(plane_z(1.5, -1.0, 10.0)).unwrap();
        let (_, r) = prune_graph(&g, &idx).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pruned.csv");
        write_pruned_edges_csv(&path, &g, &r).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 1 + r.edges_removed);
        assert!(text.lines().nth(1).unwrap().ends_with("diagonal") || text.contains("vertical"));
    }
}
