//! Minimal NIfTI-1 reader and writer.
//!
//! Handles single-file (`n+1`) and header/image pair (`ni1`) volumes, either
//! byte order, optional gzip compression, and the uint8 / int16 / int32 /
//! float32 / float64 datatypes. The affine comes from the sform when its code
//! is non-zero, otherwise from the qform, otherwise from the pixel spacing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{VolumeGeometry, VoxelGrid};
use crate::error::{invalid, Error, Result};

const HEADER_SIZE: usize = 348;
const SINGLE_FILE_OFFSET: usize = 352;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDatatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl NiftiDatatype {
    fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Self::Uint8,
            4 => Self::Int16,
            8 => Self::Int32,
            16 => Self::Float32,
            64 => Self::Float64,
            other => {
                return Err(Error::Unsupported(format!("NIfTI datatype code {other}")));
            }
        })
    }

    fn code(self) -> i16 {
        match self {
            Self::Uint8 => 2,
            Self::Int16 => 4,
            Self::Int32 => 8,
            Self::Float32 => 16,
            Self::Float64 => 64,
        }
    }

    fn bytes(self) -> usize {
        match self {
            Self::Uint8 => 1,
            Self::Int16 => 2,
            Self::Int32 | Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

struct Header {
    endian: Endian,
    dims: [usize; 4],
    datatype: NiftiDatatype,
    vox_offset: usize,
    scl_slope: f64,
    scl_inter: f64,
    affine: [[f64; 4]; 4],
    pair: bool,
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut raw)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(Cursor::new(raw)).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

macro_rules! rd {
    ($endian:expr, $f:ident, $buf:expr) => {
        match $endian {
            Endian::Little => LittleEndian::$f($buf),
            Endian::Big => BigEndian::$f($buf),
        }
    };
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Format(format!(
            "file too small for a NIfTI-1 header ({} bytes)",
            bytes.len()
        )));
    }
    let endian = if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        Endian::Little
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(Error::Format("sizeof_hdr is not 348".into()));
    };
    let magic = &bytes[344..348];
    let pair = match magic {
        b"n+1\0" => false,
        b"ni1\0" => true,
        _ => {
            return Err(Error::Format(format!(
                "bad NIfTI-1 magic {:?}",
                String::from_utf8_lossy(magic)
            )))
        }
    };

    let i16_at = |o: usize| rd!(endian, read_i16, &bytes[o..o + 2]);
    let f32_at = |o: usize| rd!(endian, read_f32, &bytes[o..o + 4]) as f64;

    let ndim = i16_at(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("dim[0] = {ndim} out of range")));
    }
    let mut dim = [1usize; 7];
    for (d, slot) in dim.iter_mut().enumerate().take(ndim as usize) {
        let v = i16_at(42 + 2 * d);
        if v < 1 {
            return Err(Error::Format(format!("dim[{}] = {v}", d + 1)));
        }
        *slot = v as usize;
    }
    if dim[4..].iter().any(|&d| d != 1) {
        return Err(Error::Unsupported("volumes with more than 4 dimensions".into()));
    }
    let datatype = NiftiDatatype::from_code(i16_at(70))?;

    let pixdim: Vec<f64> = (0..8).map(|i| f32_at(76 + 4 * i)).collect();
    let vox_offset = f32_at(108);
    if !(vox_offset >= 0.0) {
        return Err(Error::Format(format!("vox_offset {vox_offset}")));
    }
    let slope = f32_at(112);
    let (scl_slope, scl_inter) = if slope == 0.0 || !slope.is_finite() {
        (1.0, 0.0)
    } else {
        (slope, f32_at(116))
    };

    let qform_code = i16_at(252);
    let sform_code = i16_at(254);
    let mut affine = [[0.0; 4]; 4];
    affine[3][3] = 1.0;
    if sform_code > 0 {
        for (r, row) in affine.iter_mut().take(3).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f32_at(280 + 16 * r + 4 * c);
            }
        }
    } else if qform_code > 0 {
        let (b, c, d) = (f32_at(256), f32_at(260), f32_at(264));
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let rot = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ];
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let scale = [pixdim[1], pixdim[2], qfac * pixdim[3]];
        for r in 0..3 {
            for col in 0..3 {
                affine[r][col] = rot[r][col] * scale[col];
            }
            affine[r][3] = f32_at(268 + 4 * r);
        }
    } else {
        for a in 0..3 {
            affine[a][a] = if pixdim[a + 1] > 0.0 { pixdim[a + 1] } else { 1.0 };
        }
    }

    Ok(Header {
        endian,
        dims: [dim[0], dim[1], dim[2], dim[3]],
        datatype,
        vox_offset: vox_offset as usize,
        scl_slope,
        scl_inter,
        affine,
        pair,
    })
}

fn image_path(header_path: &Path) -> PathBuf {
    let s = header_path.to_string_lossy();
    if let Some(stem) = s.strip_suffix(".hdr.gz") {
        PathBuf::from(format!("{stem}.img.gz"))
    } else if let Some(stem) = s.strip_suffix(".hdr") {
        PathBuf::from(format!("{stem}.img"))
    } else {
        header_path.with_extension("img")
    }
}

/// Reads every 3-D frame of a NIfTI-1 file (one for 3-D volumes, `nt` for 4-D).
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Vec<VoxelGrid>> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let header = parse_header(&bytes)?;
    let (payload, offset) = if header.pair {
        (read_all(&image_path(path))?, header.vox_offset)
    } else {
        (bytes, header.vox_offset.max(HEADER_SIZE))
    };

    let [nx, ny, nz, nt] = header.dims;
    let per_frame = nx * ny * nz;
    let width = header.datatype.bytes();
    let needed = offset + per_frame * nt * width;
    if payload.len() < needed {
        return Err(Error::Format(format!(
            "payload truncated: need {needed} bytes, have {}",
            payload.len()
        )));
    }
    let geometry = VolumeGeometry::from_affine([nx, ny, nz], header.affine)?;

    let raw = &payload[offset..needed];
    let e = header.endian;
    let decode = |i: usize| -> f64 {
        let b = &raw[i * width..(i + 1) * width];
        match header.datatype {
            NiftiDatatype::Uint8 => b[0] as f64,
            NiftiDatatype::Int16 => rd!(e, read_i16, b) as f64,
            NiftiDatatype::Int32 => rd!(e, read_i32, b) as f64,
            NiftiDatatype::Float32 => rd!(e, read_f32, b) as f64,
            NiftiDatatype::Float64 => rd!(e, read_f64, b),
        }
    };

    let mut frames = Vec::with_capacity(nt);
    let mut non_finite = 0usize;
    for t in 0..nt {
        let data: Vec<f64> = (0..per_frame)
            .map(|i| decode(t * per_frame + i) * header.scl_slope + header.scl_inter)
            .collect();
        non_finite += data.iter().filter(|v| !v.is_finite()).count();
        frames.push(data);
    }
    if non_finite > 0 {
        return Err(Error::Data(format!("{non_finite} non-finite voxel values")));
    }
    frames
        .into_iter()
        .map(|data| VoxelGrid::new(geometry.clone(), data))
        .collect()
}

/// Reads a NIfTI-1 file that must contain exactly one 3-D frame.
pub fn load_nifti(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let mut frames = read_nifti(path)?;
    if frames.len() != 1 {
        return Err(invalid(format!(
            "expected a single 3-D volume, found {} frames",
            frames.len()
        )));
    }
    Ok(frames.pop().unwrap())
}

/// Writes frames (all sharing one geometry) as a little-endian single-file
/// NIfTI-1 volume; the file is gzip-compressed when the path ends in `.gz`.
///
/// The affine is stored in the sform. Integer datatypes round and saturate.
pub fn write_nifti(path: impl AsRef<Path>, frames: &[VoxelGrid], datatype: NiftiDatatype) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| invalid("write_nifti needs at least one frame"))?;
    let geometry = first.geometry();
    if frames.iter().any(|f| f.geometry() != geometry) {
        return Err(invalid("all frames must share one geometry"));
    }
    let dims = geometry.dims();
    if dims.iter().chain(std::iter::once(&frames.len())).any(|&d| d > i16::MAX as usize) {
        return Err(Error::Unsupported("dimension exceeds NIfTI-1 limit".into()));
    }

    let mut hdr = vec![0u8; SINGLE_FILE_OFFSET];
    LittleEndian::write_i32(&mut hdr[0..4], HEADER_SIZE as i32);
    let ndim: i16 = if frames.len() > 1 { 4 } else { 3 };
    LittleEndian::write_i16(&mut hdr[40..42], ndim);
    for (d, &v) in dims.iter().chain(std::iter::once(&frames.len())).enumerate() {
        LittleEndian::write_i16(&mut hdr[42 + 2 * d..44 + 2 * d], v as i16);
    }
    for d in 4..7 {
        LittleEndian::write_i16(&mut hdr[42 + 2 * d..44 + 2 * d], 1);
    }
    LittleEndian::write_i16(&mut hdr[70..72], datatype.code());
    LittleEndian::write_i16(&mut hdr[72..74], (datatype.bytes() * 8) as i16);
    let spacing = geometry.spacing();
    LittleEndian::write_f32(&mut hdr[76..80], 1.0);
    for a in 0..3 {
        LittleEndian::write_f32(&mut hdr[80 + 4 * a..84 + 4 * a], spacing[a] as f32);
    }
    LittleEndian::write_f32(&mut hdr[92..96], 1.0);
    LittleEndian::write_f32(&mut hdr[108..112], SINGLE_FILE_OFFSET as f32);
    hdr[123] = 2 | 8; // mm, seconds
    LittleEndian::write_i16(&mut hdr[254..256], 1);
    let affine = geometry.affine();
    for (r, row) in affine.iter().take(3).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let o = 280 + 16 * r + 4 * c;
            LittleEndian::write_f32(&mut hdr[o..o + 4], v as f32);
        }
    }
    hdr[344..348].copy_from_slice(b"n+1\0");

    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    let gz = path.extension().is_some_and(|e| e == "gz");
    let mut w: Box<dyn Write> = if gz {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(file)
    };
    w.write_all(&hdr)?;
    for frame in frames {
        for &v in frame.data() {
            match datatype {
                NiftiDatatype::Uint8 => w.write_u8(v.round().clamp(0.0, 255.0) as u8)?,
                NiftiDatatype::Int16 => w.write_i16::<LittleEndian>(
                    v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16,
                )?,
                NiftiDatatype::Int32 => w.write_i32::<LittleEndian>(
                    v.round().clamp(i32::MIN as f64, i32::MAX as f64) as i32,
                )?,
                NiftiDatatype::Float32 => w.write_f32::<LittleEndian>(v as f32)?,
                NiftiDatatype::Float64 => w.write_f64::<LittleEndian>(v)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}
