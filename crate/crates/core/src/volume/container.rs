//! `VOXG1` container for pipeline intermediates.
//!
//! Layout (all little-endian):
//!
//! | field    | type                  |
//! |----------|-----------------------|
//! | magic    | `b"VOXG1"`            |
//! | meta     | u32 length + UTF-8    |
//! | kind     | u8: 1 = mask, 2 = grid|
//! | dims     | 3 x u64               |
//! | affine   | 16 x f64, row-major   |
//! | payload  | mask: u8 (0/1) per voxel; grid: f64 per voxel, x fastest |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt};

use super::{BinaryMask, VolumeGeometry, VoxelGrid};
use crate::binio::{
    check_count, read_f64s, read_preamble, read_u64s, write_f64s, write_preamble, write_u64s,
};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"VOXG1";
const KIND_MASK: u8 = 1;
const KIND_GRID: u8 = 2;
const MAX_VOXELS: u64 = 1 << 34;

#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Mask(BinaryMask),
    Grid(VoxelGrid),
}

pub(crate) fn write_geometry<W: Write>(w: &mut W, g: &VolumeGeometry) -> Result<()> {
    write_u64s(w, g.dims().iter().map(|&d| d as u64))?;
    let flat: Vec<f64> = g.affine().iter().flatten().copied().collect();
    write_f64s(w, &flat)
}

pub fn write_container(path: impl AsRef<Path>, item: &Container, meta: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_preamble(&mut w, MAGIC, meta)?;
    match item {
        Container::Mask(m) => {
            w.write_u8(KIND_MASK)?;
            write_geometry(&mut w, m.geometry())?;
            let bytes: Vec<u8> = m.bits().iter().map(|&b| b as u8).collect();
            w.write_all(&bytes)?;
        }
        Container::Grid(g) => {
            w.write_u8(KIND_GRID)?;
            write_geometry(&mut w, g.geometry())?;
            write_f64s(&mut w, g.data())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads dims and affine as written by [`write_geometry`].
pub(crate) fn read_geometry<R: Read>(r: &mut R) -> Result<VolumeGeometry> {
    let dims = read_u64s(r, 3)?;
    let total = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d));
    check_count("voxel", total.unwrap_or(u64::MAX), MAX_VOXELS)?;
    let flat = read_f64s(r, 16)?;
    let mut affine = [[0.0; 4]; 4];
    for (i, v) in flat.into_iter().enumerate() {
        affine[i / 4][i % 4] = v;
    }
    VolumeGeometry::from_affine([dims[0] as usize, dims[1] as usize, dims[2] as usize], affine)
}

/// Returns the stored item and its metadata string.
pub fn read_container(path: impl AsRef<Path>) -> Result<(Container, String)> {
    let mut r = BufReader::new(File::open(path)?);
    let meta = read_preamble(&mut r, MAGIC)?;
    let kind = r.read_u8()?;
    let geometry = read_geometry(&mut r)?;
    let n = geometry.len();
    let item = match kind {
        KIND_MASK => {
            let mut bytes = vec![0u8; n];
            r.read_exact(&mut bytes)?;
            if bytes.iter().any(|&b| b > 1) {
                return Err(Error::Format("mask payload must be 0/1".into()));
            }
            Container::Mask(BinaryMask::new(geometry, bytes.into_iter().map(|b| b == 1).collect())?)
        }
        KIND_GRID => Container::Grid(VoxelGrid::new(geometry, read_f64s(&mut r, n)?)?),
        other => return Err(Error::Format(format!("unknown VOXG1 kind {other}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after VOXG1 payload".into()));
    }
    Ok((item, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_and_grid_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = VolumeGeometry::axis_aligned([3, 2, 1], [1.25; 3], [-4.0, 2.0, 7.5]).unwrap();
        let mask = BinaryMask::from_fn(g.clone(), |[i, j, _]| (i + j) % 2 == 0);
        let grid = VoxelGrid::new(g, (0..6).map(|v| v as f64 / 7.0).collect()).unwrap();
        for (name, item) in [("m.voxg", Container::Mask(mask)), ("g.voxg", Container::Grid(grid))] {
            let p = dir.path().join(name);
            write_container(&p, &item, "tool=test").unwrap();
            let (back, meta) = read_container(&p).unwrap();
            assert_eq!(back, item);
            assert_eq!(meta, "tool=test");
        }
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"CHCG1\0\0\0\0").unwrap();
        assert!(matches!(read_container(&p), Err(Error::Format(_))));
    }
}
