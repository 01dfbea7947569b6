//! Little-endian helpers shared by the `VOXG1`, `CHCG1` and `SPEC1` containers.
//!
//! Every container starts with its 5-byte ASCII magic followed by a
//! length-prefixed (u32) UTF-8 metadata string. Everything after that is
//! container specific.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Upper bound on the metadata string, to reject garbage lengths early.
const MAX_META_LEN: u32 = 1 << 20;

pub(crate) fn write_preamble<W: Write>(w: &mut W, magic: &[u8; 5], meta: &str) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(meta.len() as u32)?;
    w.write_all(meta.as_bytes())?;
    Ok(())
}

/// Reads and checks the magic, returning the metadata string.
pub(crate) fn read_preamble<R: Read>(r: &mut R, magic: &[u8; 5]) -> Result<String> {
    let mut found = [0u8; 5];
    r.read_exact(&mut found)?;
    if &found != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&found)
        )));
    }
    read_string(r)
}

pub(crate) fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()?;
    if len > MAX_META_LEN {
        return Err(Error::Format(format!("string length {len} too large")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("metadata is not valid UTF-8".into()))
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub(crate) fn write_u64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = u64>) -> Result<()> {
    for v in values {
        w.write_u64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn read_u64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<u64>> {
    let mut out = vec![0u64; n];
    r.read_u64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

/// Guards allocations driven by counts read from a file header.
pub(crate) fn check_count(what: &str, n: u64, limit: u64) -> Result<usize> {
    if n > limit {
        return Err(Error::Format(format!("{what} count {n} exceeds limit {limit}")));
    }
    Ok(n as usize)
}
