//! Volumetric lattices: geometry, scalar grids and binary masks.
//!
//! Voxel data is stored linearly with x varying fastest, i.e. the voxel
//! `(i, j, k)` lives at `i + nx * (j + ny * k)`, matching the NIfTI on-disk
//! layout.

mod container;
mod nifti;
mod ops;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use container::{read_container, write_container, Container};
pub(crate) use container::{read_geometry, write_geometry};
pub use nifti::{load_nifti, read_nifti, write_nifti, NiftiDatatype};
pub use ops::{
    enforce_6connectivity, resample_mask, sample_signal, threshold_mask, SampledSignal,
    MAX_OUTSIDE_FRACTION,
};

pub type Point3 = [f64; 3];

/// Lattice extent plus the voxel-index to world-mm transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeGeometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    /// Row-major 4x4 affine mapping `(i, j, k, 1)` to world millimetres.
    affine: [[f64; 4]; 4],
}

impl VolumeGeometry {
    /// Builds a geometry from an affine; the spacing is taken from the column
    /// norms of its linear block.
    pub fn from_affine(dims: [usize; 3], affine: [[f64; 4]; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(invalid(format!("volume dims must be >= 1, got {dims:?}")));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("affine contains non-finite entries".into()));
        }
        let lin = linear_block(&affine);
        if lin.determinant().abs() < 1e-12 {
            return Err(Error::Data("affine linear block is singular".into()));
        }
        let spacing = [0, 1, 2].map(|c| lin.column(c).norm());
        Ok(Self { dims, spacing, affine })
    }

    /// Axis-aligned geometry whose voxel `(0,0,0)` centre sits at `origin`.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: Point3) -> Result<Self> {
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(invalid(format!("spacing must be positive, got {spacing:?}")));
        }
        let mut affine = [[0.0; 4]; 4];
        for a in 0..3 {
            affine[a][a] = spacing[a];
            affine[a][3] = origin[a];
        }
        affine[3][3] = 1.0;
        Self::from_affine(dims, affine)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &[[f64; 4]; 4] {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn linear_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    #[inline]
    pub fn voxel_coords(&self, linear: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    /// World position of a (possibly fractional) voxel coordinate.
    pub fn voxel_to_world(&self, v: [f64; 3]) -> Point3 {
        let a = &self.affine;
        [0, 1, 2].map(|r| a[r][0] * v[0] + a[r][1] * v[1] + a[r][2] * v[2] + a[r][3])
    }

    pub fn world_to_voxel(&self, p: Point3) -> [f64; 3] {
        let lin = linear_block(&self.affine);
        // Invertibility is checked at construction.
        let inv = lin.try_inverse().expect("affine linear block is invertible");
        let rel = Vector3::new(
            p[0] - self.affine[0][3],
            p[1] - self.affine[1][3],
            p[2] - self.affine[2][3],
        );
        let v = inv * rel;
        [v[0], v[1], v[2]]
    }

    /// World-mm centre of the voxel with the given linear index.
    pub fn center_of(&self, linear: usize) -> Point3 {
        let c = self.voxel_coords(linear);
        self.voxel_to_world([c[0] as f64, c[1] as f64, c[2] as f64])
    }
}

fn linear_block(a: &[[f64; 4]; 4]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| a[r][c])
}

/// Scalar volume, one `f64` per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    geometry: VolumeGeometry,
    data: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(geometry: VolumeGeometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: data.len(),
            });
        }
        let bad = data.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::Data(format!("{bad} non-finite voxel values")));
        }
        Ok(Self { geometry, data })
    }

    pub fn filled(geometry: VolumeGeometry, value: f64) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            data: vec![value; n],
        }
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, ijk: [usize; 3]) -> f64 {
        self.data[self.geometry.linear_index(ijk)]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Boolean volume.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: VolumeGeometry,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(geometry: VolumeGeometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: bits.len(),
            });
        }
        Ok(Self { geometry, bits })
    }

    pub fn empty(geometry: VolumeGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            bits: vec![false; n],
        }
    }

    /// Mask whose set voxels are those for which `f(i, j, k)` holds.
    pub fn from_fn(geometry: VolumeGeometry, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let bits = (0..geometry.len())
            .map(|l| f(geometry.voxel_coords(l)))
            .collect();
        Self { geometry, bits }
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, ijk: [usize; 3]) -> bool {
        self.bits[self.geometry.linear_index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], value: bool) {
        let l = self.geometry.linear_index(ijk);
        self.bits[l] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Linear indices of set voxels, ascending.
    pub fn set_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn to_grid(&self) -> VoxelGrid {
        VoxelGrid {
            geometry: self.geometry.clone(),
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_from_affine_column_norms() {
        let mut a = [[0.0; 4]; 4];
        // 90 degree rotation in the xy plane with 2 mm voxels.
        a[0][1] = -2.0;
        a[1][0] = 2.0;
        a[2][2] = 1.25;
        a[3][3] = 1.0;
        let g = VolumeGeometry::from_affine([3, 3, 3], a).unwrap();
        assert_eq!(g.spacing(), [2.0, 2.0, 1.25]);
        let p = g.voxel_to_world([1.0, 2.0, 3.0]);
        let v = g.world_to_voxel(p);
        for a in 0..3 {
            assert!((v[a] - [1.0, 2.0, 3.0][a]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(VolumeGeometry::axis_aligned([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(VolumeGeometry::axis_aligned([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        let mut a = [[0.0; 4]; 4];
        a[0][0] = 1.0;
        a[1][1] = 1.0;
        assert!(VolumeGeometry::from_affine([1, 1, 1], a).is_err());
    }

    #[test]
    fn linear_layout_is_x_fastest() {
        let g = VolumeGeometry::axis_aligned([4, 3, 2], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(g.linear_index([1, 0, 0]), 1);
        assert_eq!(g.linear_index([0, 1, 0]), 4);
        assert_eq!(g.linear_index([0, 0, 1]), 12);
        for l in 0..g.len() {
            assert_eq!(g.linear_index(g.voxel_coords(l)), l);
        }
    }

    #[test]
    fn grid_rejects_non_finite() {
        let g = VolumeGeometry::axis_aligned([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let err = VoxelGrid::new(g, vec![1.0, f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("1 non-finite"));
    }
}
