//! Voxel graphs: construction from masks, surface pruning, connected
//! components and the normalized Laplacian.

mod build;
pub(crate) mod components;
mod container;
mod laplacian;
mod prune;

use crate::error::{invalid, Error, Result};
use crate::volume::{Point3, VolumeGeometry};

pub use build::{build_graph, NEIGHBOUR_OFFSETS_26};
pub use components::{connected_components, largest_component, Components};
pub use container::{read_graph, write_graph};
pub use laplacian::{laplacian, LaplacianOperator};
pub use prune::{prune_graph, write_pruned_edges_csv, ConnectionType, PruneReport, PrunedEdge};

/// Symmetric binary adjacency in compressed-row form. Neighbour lists are
/// sorted ascending and contain no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbours: Vec<u32>,
}

impl Adjacency {
    /// Builds an adjacency from undirected edges; duplicates are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(invalid("too many vertices"));
        }
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            lists[a].push(b as u32);
            lists[b].push(a as u32);
        }
        Ok(Self::from_lists(lists))
    }

    pub(crate) fn from_lists(mut lists: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut neighbours = Vec::new();
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
            neighbours.extend_from_slice(l);
            offsets.push(neighbours.len());
        }
        Self { offsets, neighbours }
    }

    /// Validates raw CSR arrays (used when reading containers).
    pub fn from_csr(offsets: Vec<usize>, neighbours: Vec<u32>) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("adjacency: {m}"));
        if offsets.first() != Some(&0) || offsets.last() != Some(&neighbours.len()) {
            return Err(bad("offsets do not span the neighbour array"));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("offsets are not monotone"));
        }
        let adj = Self { offsets, neighbours };
        let n = adj.len();
        for i in 0..n {
            let row = adj.neighbours(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("neighbour lists must be strictly ascending"));
            }
            for &j in row {
                let j = j as usize;
                if j >= n || j == i {
                    return Err(bad("neighbour out of range or self-loop"));
                }
                if adj.neighbours(j).binary_search(&(i as u32)).is_err() {
                    return Err(bad("adjacency is not symmetric"));
                }
            }
        }
        Ok(adj)
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn neighbours(&self, i: usize) -> &[u32] {
        &self.neighbours[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbours.len() / 2
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbour_array(&self) -> &[u32] {
        &self.neighbours
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbours(a).binary_search(&(b as u32)).is_ok()
    }

    /// Undirected edges `(i, j)` with `i < j`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |i| {
            self.neighbours(i)
                .iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Subgraph induced by the vertices with `keep[i]`; returns the new
    /// adjacency and the old index of every kept vertex.
    pub fn induced(&self, keep: &[bool]) -> (Self, Vec<usize>) {
        let mut new_index = vec![u32::MAX; self.len()];
        let mut kept = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_index[i] = kept.len() as u32;
                kept.push(i);
            }
        }
        let lists = kept
            .iter()
            .map(|&i| {
                self.neighbours(i)
                    .iter()
                    .filter_map(|&j| {
                        let m = new_index[j as usize];
                        (m != u32::MAX).then_some(m)
                    })
                    .collect()
            })
            .collect();
        (Self::from_lists(lists), kept)
    }

    /// Cycle graph on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid("a cycle needs at least 3 vertices"));
        }
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }
}

/// Graph whose vertices are voxels of a lattice, ordered by ascending linear
/// voxel index.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGraph {
    adjacency: Adjacency,
    vertex_to_voxel: Vec<usize>,
    geometry: VolumeGeometry,
}

impl VoxelGraph {
    pub fn new(adjacency: Adjacency, vertex_to_voxel: Vec<usize>, geometry: VolumeGeometry) -> Result<Self> {
        if adjacency.len() != vertex_to_voxel.len() {
            return Err(Error::DimensionMismatch {
                expected: adjacency.len(),
                actual: vertex_to_voxel.len(),
            });
        }
        if vertex_to_voxel.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("vertex voxels must be strictly ascending"));
        }
        if vertex_to_voxel.last().is_some_and(|&v| v >= geometry.len()) {
            return Err(invalid("vertex voxel index outside the lattice"));
        }
        Ok(Self {
            adjacency,
            vertex_to_voxel,
            geometry,
        })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.num_edges()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn vertex_to_voxel(&self) -> &[usize] {
        &self.vertex_to_voxel
    }

    pub fn voxel_to_vertex(&self, voxel: usize) -> Option<usize> {
        self.vertex_to_voxel.binary_search(&voxel).ok()
    }

    /// World-mm centre of a vertex's voxel.
    pub fn vertex_center(&self, v: usize) -> Point3 {
        self.geometry.center_of(self.vertex_to_voxel[v])
    }

    pub fn vertex_centers(&self) -> Vec<Point3> {
        (0..self.len()).map(|v| self.vertex_center(v)).collect()
    }

    pub(crate) fn induced(&self, keep: &[bool]) -> Self {
        let (adjacency, kept) = self.adjacency.induced(keep);
        Self {
            adjacency,
            vertex_to_voxel: kept.iter().map(|&i| self.vertex_to_voxel[i]).collect(),
            geometry: self.geometry.clone(),
        }
    }
}
