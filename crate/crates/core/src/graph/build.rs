use rayon::prelude::*;

use super::{Adjacency, VoxelGraph};
use crate::error::{invalid, Result};
use crate::volume::BinaryMask;

/// The 26 lattice offsets sharing a face, edge or corner with a voxel,
/// ordered by ascending linear offset (z slowest).
pub const NEIGHBOUR_OFFSETS_26: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// One vertex per set voxel (ascending linear index), with an unweighted
/// edge between every pair of voxels in each other's 26-neighbourhood.
///
/// Fails on an empty mask, or when some set voxel has no set 26-neighbour
/// (run [`crate::volume::enforce_6connectivity`] first).
pub fn build_graph(mask: &BinaryMask) -> Result<VoxelGraph> {
    let geometry = mask.geometry();
    let voxels = mask.set_indices();
    if voxels.is_empty() {
        return Err(invalid("mask is empty"));
    }
    if voxels.len() > u32::MAX as usize {
        return Err(invalid("mask has too many voxels"));
    }
    let mut lookup = vec![u32::MAX; geometry.len()];
    for (v, &l) in voxels.iter().enumerate() {
        lookup[l] = v as u32;
    }
    let dims = geometry.dims();
    let lists: Vec<Vec<u32>> = voxels
        .par_iter()
        .map(|&l| {
            let [x, y, z] = geometry.voxel_coords(l);
            let mut row = Vec::with_capacity(26);
            for d in &NEIGHBOUR_OFFSETS_26 {
                let (nx, ny, nz) = (x as isize + d[0], y as isize + d[1], z as isize + d[2]);
                if nx < 0
                    || ny < 0
                    || nz < 0
                    || nx >= dims[0] as isize
                    || ny >= dims[1] as isize
                    || nz >= dims[2] as isize
                {
                    continue;
                }
                let m = lookup[geometry.linear_index([nx as usize, ny as usize, nz as usize])];
                if m != u32::MAX {
                    row.push(m);
                }
            }
            row
        })
        .collect();
    if let Some(v) = lists.iter().position(|r| r.is_empty()) {
        return Err(invalid(format!(
            "voxel {:?} has no neighbour; clean the mask first",
            geometry.voxel_coords(voxels[v])
        )));
    }
    VoxelGraph::new(Adjacency::from_lists(lists), voxels, geometry.clone())
}
