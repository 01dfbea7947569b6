//! `CHCG1` graph container.
//!
//! Layout (little-endian) after the common magic/meta preamble:
//! `n: u64`, `edges: u64`, dims `3 x u64`, affine `16 x f64`,
//! row offsets `(n + 1) x u64`, neighbours `2 * edges x u32`,
//! vertex voxels `n x u64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Adjacency, VoxelGraph};
use crate::binio::{check_count, read_preamble, read_u64s, write_preamble, write_u64s};
use crate::error::{Error, Result};
use crate::volume::{read_geometry, write_geometry};

const MAGIC: &[u8; 5] = b"CHCG1";
const MAX_VERTICES: u64 = 1 << 31;
const MAX_EDGES: u64 = 1 << 35;

pub fn write_graph(path: impl AsRef<Path>, graph: &VoxelGraph, meta: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_preamble(&mut w, MAGIC, meta)?;
    write_u64s(&mut w, [graph.len() as u64, graph.num_edges() as u64])?;
    write_geometry(&mut w, graph.geometry())?;
    let adj = graph.adjacency();
    write_u64s(&mut w, adj.offsets().iter().map(|&o| o as u64))?;
    for &j in adj.neighbour_array() {
        w.write_u32::<LittleEndian>(j)?;
    }
    write_u64s(&mut w, graph.vertex_to_voxel().iter().map(|&v| v as u64))?;
    w.flush()?;
    Ok(())
}

/// Reads and fully validates a graph, returning it with its metadata string.
pub fn read_graph(path: impl AsRef<Path>) -> Result<(VoxelGraph, String)> {
    let mut r = BufReader::new(File::open(path)?);
    let meta = read_preamble(&mut r, MAGIC)?;
    let head = read_u64s(&mut r, 2)?;
    let n = check_count("vertex", head[0], MAX_VERTICES)?;
    let e = check_count("edge", head[1], MAX_EDGES)?;
    let geometry = read_geometry(&mut r)?;
    let offsets = read_u64s(&mut r, n + 1)?.into_iter().map(|o| o as usize).collect();
    let mut neighbours = vec![0u32; 2 * e];
    r.read_u32_into::<LittleEndian>(&mut neighbours)?;
    let voxels = read_u64s(&mut r, n)?.into_iter().map(|v| v as usize).collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after CHCG1 payload".into()));
    }
    let adjacency = Adjacency::from_csr(offsets, neighbours)?;
    let graph = VoxelGraph::new(adjacency, voxels, geometry).map_err(|e| Error::Format(e.to_string()))?;
    Ok((graph, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::volume::{BinaryMask, VolumeGeometry};

    #[test]
    fn roundtrip_and_identical_bytes() {
        let g = VolumeGeometry::axis_aligned([5, 4, 3], [2.0, 2.0, 2.5], [1.0, -3.0, 0.0]).unwrap();
        let mask = BinaryMask::from_fn(g, |[i, j, k]| (i + j + k) % 3 != 0);
        let graph = build_graph(&mask).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.chcg"), dir.path().join("b.chcg"));
        write_graph(&a, &graph, "m").unwrap();
        write_graph(&b, &build_graph(&mask).unwrap(), "m").unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let (back, meta) = read_graph(&a).unwrap();
        assert_eq!(back, graph);
        assert_eq!(meta, "m");
    }

    #[test]
    fn truncated_file_is_an_error() {
        let g = VolumeGeometry::axis_aligned([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        let graph = build_graph(&BinaryMask::from_fn(g, |_| true)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.chcg");
        write_graph(&p, &graph, "").unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_graph(&p).is_err());
    }
}
