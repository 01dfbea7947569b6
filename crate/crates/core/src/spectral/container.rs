//! `SPEC1` spectrum container and the eigenvalue CDF export.
//!
//! Layout (little-endian) after the common magic/meta preamble:
//! `n: u64`, `k: u64`, `coverage: f64`, `seed: u64`, solver string
//! (u32 length + UTF-8), eigenvalues `k x f64`, residuals `k x f64`,
//! eigenvectors `k x n x f64` (one vector after another).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::SpectralSlice;
use crate::binio::{check_count, read_f64s, read_preamble, read_string, read_u64s, write_f64s, write_preamble, write_string, write_u64s};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"SPEC1";
const MAX_ENTRIES: u64 = 1 << 33;

pub fn write_spectrum(path: impl AsRef<Path>, slice: &SpectralSlice, meta: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_preamble(&mut w, MAGIC, meta)?;
    write_u64s(&mut w, [slice.dim() as u64, slice.len() as u64])?;
    w.write_f64::<LittleEndian>(slice.coverage())?;
    w.write_u64::<LittleEndian>(slice.seed())?;
    write_string(&mut w, slice.solver())?;
    write_f64s(&mut w, slice.eigenvalues())?;
    write_f64s(&mut w, slice.residuals())?;
    write_f64s(&mut w, slice.vector_data())?;
    w.flush()?;
    Ok(())
}

pub fn read_spectrum(path: impl AsRef<Path>) -> Result<(SpectralSlice, String)> {
    let mut r = BufReader::new(File::open(path)?);
    let meta = read_preamble(&mut r, MAGIC)?;
    let head = read_u64s(&mut r, 2)?;
    let n = check_count("vertex", head[0], MAX_ENTRIES)?;
    let k = check_count("eigenpair", head[1], head[0])?;
    check_count("eigenvector entry", (n as u64).saturating_mul(k as u64), MAX_ENTRIES)?;
    let coverage = r.read_f64::<LittleEndian>()?;
    let seed = r.read_u64::<LittleEndian>()?;
    let solver = read_string(&mut r)?;
    let values = read_f64s(&mut r, k)?;
    let residuals = read_f64s(&mut r, k)?;
    let vectors = read_f64s(&mut r, n * k)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after SPEC1 payload".into()));
    }
    let slice = SpectralSlice::new(n, values, vectors, residuals, coverage, solver, seed)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok((slice, meta))
}

/// `lambda,count,fraction` rows, one per eigenvalue in ascending order.
pub fn write_eigenvalue_cdf_csv(path: impl AsRef<Path>, slice: &SpectralSlice) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "lambda,count,fraction")?;
    let vals = slice.eigenvalues();
    let n = slice.dim() as f64;
    for (i, &v) in vals.iter().enumerate() {
        writeln!(w, "{v:e},{},{:e}", i + 1, (i + 1) as f64 / n)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Adjacency, LaplacianOperator};
    use crate::spectral::eig_dense;

    #[test]
    fn roundtrip_is_exact() {
        let a = Adjacency::cycle(9).unwrap();
        let s = eig_dense(&LaplacianOperator::new(&a).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.spec");
        write_spectrum(&p, &s, "meta").unwrap();
        let (back, meta) = read_spectrum(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(meta, "meta");
        let csv = dir.path().join("cdf.csv");
        write_eigenvalue_cdf_csv(&csv, &s).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 9);
        assert!(text.lines().last().unwrap().starts_with(&format!("{:e},9,", s.eigenvalues()[8])));
    }
}
