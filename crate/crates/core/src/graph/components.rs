use std::collections::VecDeque;

use super::{Adjacency, VoxelGraph};
use crate::error::{invalid, Result};

/// Connected-component labelling. Label 0 is the largest component; equal
/// sizes are ordered by their smallest vertex (equivalently, smallest voxel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub labels: Vec<u32>,
    /// Component sizes indexed by label, hence non-increasing.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

pub(crate) fn label_components(adj: &Adjacency) -> Components {
    let n = adj.len();
    let mut raw = vec![u32::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if raw[start] != u32::MAX {
            continue;
        }
        let label = sizes.len() as u32;
        raw[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &w in adj.neighbours(v) {
                let w = w as usize;
                if raw[w] == u32::MAX {
                    raw[w] = label;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
    }
    // Discovery order is by smallest member, so a stable sort by size keeps
    // the tie rule.
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    let mut relabel = vec![0u32; sizes.len()];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new as u32;
    }
    Components {
        labels: raw.iter().map(|&l| relabel[l as usize]).collect(),
        sizes: order.iter().map(|&o| sizes[o]).collect(),
    }
}

pub fn connected_components(graph: &VoxelGraph) -> Components {
    label_components(graph.adjacency())
}

/// Induced subgraph on the largest connected component.
pub fn largest_component(graph: &VoxelGraph) -> Result<VoxelGraph> {
    if graph.is_empty() {
        return Err(invalid("graph is empty"));
    }
    let comps = connected_components(graph);
    if comps.count() == 1 {
        return Ok(graph.clone());
    }
    let keep: Vec<bool> = comps.labels.iter().map(|&l| l == 0).collect();
    Ok(graph.induced(&keep))
}
