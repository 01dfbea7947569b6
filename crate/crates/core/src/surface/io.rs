//! FreeSurfer binary triangle surfaces and ASCII OFF.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::volume::Point3;

const FS_TRIANGLE_MAGIC: [u8; 3] = [0xFF, 0xFF, 0xFE];
const MAX_ELEMENTS: i32 = 1 << 28;

/// Loads a surface, choosing the reader from the leading bytes.
pub fn load_surface(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let mut head = [0u8; 3];
    let n = File::open(path)?.read(&mut head)?;
    if n == 3 && head == FS_TRIANGLE_MAGIC {
        return read_freesurfer(path);
    }
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    if first.trim_start().starts_with("OFF") {
        return read_off(path);
    }
    Err(Error::Format(format!(
        "{}: neither a FreeSurfer triangle surface nor OFF",
        path.display()
    )))
}

pub fn read_freesurfer(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 3];
    r.read_exact(&mut magic)?;
    if magic != FS_TRIANGLE_MAGIC {
        return Err(Error::Format("missing FreeSurfer triangle magic".into()));
    }
    // "created by ..." comment, terminated by two newlines.
    let mut prev = 0u8;
    loop {
        let b = r.read_u8()?;
        if b == b'\n' && prev == b'\n' {
            break;
        }
        prev = b;
    }
    let nv = r.read_i32::<BigEndian>()?;
    let nf = r.read_i32::<BigEndian>()?;
    if !(0..MAX_ELEMENTS).contains(&nv) || !(0..MAX_ELEMENTS).contains(&nf) {
        return Err(Error::Format(format!("implausible counts: {nv} vertices, {nf} faces")));
    }
    let mut vertices = Vec::with_capacity(nv as usize);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            *c = r.read_f32::<BigEndian>()? as f64;
        }
        vertices.push(p);
    }
    let mut triangles = Vec::with_capacity(nf as usize);
    for _ in 0..nf {
        let mut t = [0u32; 3];
        for c in &mut t {
            let i = r.read_i32::<BigEndian>()?;
            if i < 0 {
                return Err(Error::Data(format!("negative vertex index {i}")));
            }
            *c = i as u32;
        }
        triangles.push(t);
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn write_freesurfer(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&FS_TRIANGLE_MAGIC)?;
    w.write_all(b"created by chc\n\n")?;
    w.write_i32::<BigEndian>(mesh.vertices().len() as i32)?;
    w.write_i32::<BigEndian>(mesh.triangles().len() as i32)?;
    for v in mesh.vertices() {
        for &c in v {
            w.write_f32::<BigEndian>(c as f32)?;
        }
    }
    for t in mesh.triangles() {
        for &i in t {
            w.write_i32::<BigEndian>(i as i32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an ASCII OFF file. Polygons with more than three vertices are fanned
/// into triangles; `#` comments are ignored.
pub fn read_off(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let fmt = |m: &str| Error::Format(format!("OFF: {m}"));
    match tokens.next() {
        Some("OFF") => {}
        _ => return Err(fmt("missing OFF header")),
    }
    let mut next_num = |what: &str| -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| fmt(&format!("unexpected end of file reading {what}")))?
            .parse::<f64>()
            .map_err(|_| fmt(&format!("bad number in {what}")))
    };
    let nv = next_num("vertex count")? as usize;
    let nf = next_num("face count")? as usize;
    let _edges = next_num("edge count")?;
    let mut vertices: Vec<Point3> = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push([next_num("vertex")?, next_num("vertex")?, next_num("vertex")?]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = next_num("face size")? as usize;
        if k < 3 {
            return Err(fmt("face with fewer than 3 vertices"));
        }
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            let i = next_num("face index")?;
            if i < 0.0 || i.fract() != 0.0 {
                return Err(Error::Data(format!("OFF: invalid vertex index {i}")));
            }
            idx.push(i as u32);
        }
        for j in 1..k - 1 {
            triangles.push([idx[0], idx[j], idx[j + 1]]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn write_off(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.vertices().len(), mesh.triangles().len())?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_unit_square() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sq.off");
        std::fs::write(&p, "OFF\n# unit square\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n").unwrap();
        let m = load_surface(&p).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert_eq!(m.vertices().len(), 4);
    }

    #[test]
    fn off_quad_is_fanned_and_degenerate_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.off");
        std::fs::write(&p, "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n3 0 0 1\n").unwrap();
        let m = read_off(&p).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert_eq!(m.dropped_degenerate(), 1);
    }

    #[test]
    fn freesurfer_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        // f32-representable coordinates survive the round trip exactly.
        let mesh = TriangleMesh::new(
            vec![[0.5, -1.25, 3.0], [10.0, 0.0, 0.25], [0.0, 7.5, -2.0], [1.0, 1.0, 1.0]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let p = dir.path().join("lh.pial");
        write_freesurfer(&p, &mesh).unwrap();
        assert_eq!(load_surface(&p).unwrap(), mesh);
        let o = dir.path().join("lh.off");
        write_off(&o, &mesh).unwrap();
        assert_eq!(load_surface(&o).unwrap(), mesh);
    }

    #[test]
    fn unknown_magic_and_bad_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.srf");
        std::fs::write(&p, b"PLY\n").unwrap();
        assert!(matches!(load_surface(&p), Err(Error::Format(_))));
        let o = dir.path().join("bad.off");
        std::fs::write(&o, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n").unwrap();
        assert!(matches!(load_surface(&o), Err(Error::Data(_))));
    }
}
