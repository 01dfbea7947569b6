use rayon::prelude::*;

use super::{BinaryMask, Point3, VolumeGeometry, VoxelGrid};
use crate::error::{invalid, Error, Result};

/// Fraction of out-of-volume sample points above which sampling is treated as
/// a registration failure.
pub const MAX_OUTSIDE_FRACTION: f64 = 0.5;

/// Slack, in voxel units, when deciding whether a point is inside a grid.
const INSIDE_TOL: f64 = 1e-9;

pub fn threshold_mask(grid: &VoxelGrid, threshold: f64) -> Result<BinaryMask> {
    if !threshold.is_finite() {
        return Err(invalid("threshold must be finite"));
    }
    let bits = grid.data().iter().map(|&v| v >= threshold).collect();
    BinaryMask::new(grid.geometry().clone(), bits)
}

/// Nearest-neighbour resampling onto a lattice that keeps the source origin
/// and axis directions but uses `target_spacing`.
pub fn resample_mask(mask: &BinaryMask, target_spacing: [f64; 3]) -> Result<BinaryMask> {
    if target_spacing.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(invalid(format!("target spacing must be positive, got {target_spacing:?}")));
    }
    let src = mask.geometry();
    let spacing = src.spacing();
    let dims = src.dims();
    let scale = [0, 1, 2].map(|a| target_spacing[a] / spacing[a]);
    let out_dims = [0, 1, 2].map(|a| {
        let extent = dims[a] as f64 * spacing[a] / target_spacing[a];
        ((extent - 1e-9).ceil() as usize).max(1)
    });

    let mut affine = *src.affine();
    for row in affine.iter_mut().take(3) {
        for (c, v) in row.iter_mut().take(3).enumerate() {
            *v *= scale[c];
        }
    }
    let geometry = VolumeGeometry::from_affine(out_dims, affine)?;

    // Source index hit by each output index, per axis; None when outside.
    let lookup: Vec<Vec<Option<usize>>> = (0..3)
        .map(|a| {
            (0..out_dims[a])
                .map(|i| {
                    let s = (i as f64 * scale[a] + 0.5).floor();
                    (s >= 0.0 && (s as usize) < dims[a]).then_some(s as usize)
                })
                .collect()
        })
        .collect();

    Ok(BinaryMask::from_fn(geometry, |[i, j, k]| {
        match (lookup[0][i], lookup[1][j], lookup[2][k]) {
            (Some(x), Some(y), Some(z)) => mask.get([x, y, z]),
            _ => false,
        }
    }))
}

/// Offsets of the 6 face neighbours.
pub(crate) const FACE_NEIGHBOURS: [[isize; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

#[inline]
pub(crate) fn offset_voxel(dims: [usize; 3], v: [usize; 3], d: [isize; 3]) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for a in 0..3 {
        let c = v[a] as isize + d[a];
        if c < 0 || c >= dims[a] as isize {
            return None;
        }
        out[a] = c as usize;
    }
    Some(out)
}

/// Removes set voxels without a set face neighbour.
///
/// A voxel with no set face neighbour contributes nothing to anyone else's
/// face count, so a single pass already reaches the fixed point of the
/// "remove until none remain" rule.
pub fn enforce_6connectivity(mask: &BinaryMask) -> BinaryMask {
    let geometry = mask.geometry();
    let dims = geometry.dims();
    let bits: Vec<bool> = (0..geometry.len())
        .into_par_iter()
        .map(|l| {
            mask.bits()[l] && {
                let v = geometry.voxel_coords(l);
                FACE_NEIGHBOURS
                    .iter()
                    .filter_map(|&d| offset_voxel(dims, v, d))
                    .any(|n| mask.get(n))
            }
        })
        .collect();
    BinaryMask {
        geometry: geometry.clone(),
        bits,
    }
}

/// Trilinearly interpolated values plus the number of points that fell
/// outside the grid (those read as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub values: Vec<f64>,
    pub outside: usize,
}

/// Samples `grid` at world-mm points by trilinear interpolation.
///
/// Fails with [`Error::Alignment`] when more than half of the points lie
/// outside the grid's bounding box.
pub fn sample_signal(grid: &VoxelGrid, points: &[Point3]) -> Result<SampledSignal> {
    let geometry = grid.geometry();
    let dims = geometry.dims();
    let samples: Vec<Option<f64>> = points
        .par_iter()
        .map(|&p| trilinear(grid, dims, geometry.world_to_voxel(p)))
        .collect();
    let outside = samples.iter().filter(|s| s.is_none()).count();
    if !points.is_empty() && outside as f64 > MAX_OUTSIDE_FRACTION * points.len() as f64 {
        return Err(Error::Alignment {
            outside,
            total: points.len(),
        });
    }
    if outside > 0 {
        log::warn!("{outside} of {} sample points outside the volume, read as 0", points.len());
    }
    Ok(SampledSignal {
        values: samples.into_iter().map(|s| s.unwrap_or(0.0)).collect(),
        outside,
    })
}

fn trilinear(grid: &VoxelGrid, dims: [usize; 3], v: [f64; 3]) -> Option<f64> {
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let hi = (dims[a] - 1) as f64;
        if !(v[a] >= -INSIDE_TOL && v[a] <= hi + INSIDE_TOL) {
            return None;
        }
        let c = v[a].clamp(0.0, hi);
        let f = c.floor();
        // Keep the upper corner inside the grid.
        let b = if f >= hi && dims[a] > 1 { hi - 1.0 } else { f };
        base[a] = b as usize;
        frac[a] = c - b;
    }
    let mut acc = 0.0;
    for corner in 0..8usize {
        let mut w = 1.0;
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let up = (corner >> a) & 1 == 1;
            if up {
                if dims[a] == 1 {
                    w = 0.0;
                    break;
                }
                ijk[a] = base[a] + 1;
                w *= frac[a];
            } else {
                ijk[a] = base[a];
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            acc += w * grid.get(ijk);
        }
    }
    Some(acc)
}
