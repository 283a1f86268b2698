//! Grayscale Portable Float Map (`Pf`) reader and writer.
//!
//! Rows are stored bottom-to-top on disk; in memory rasters are top-down.
//! A negative scale line means little-endian samples, positive big-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DepthFrame, Intrinsics};

/// Raw single-channel float raster as stored in a PFM file.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

struct Header {
    width: usize,
    height: usize,
    endian: Endian,
    data_offset: usize,
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| bad("empty file"))?;
    if magic != "Pf" {
        return Err(bad(&format!("expected grayscale PFM magic 'Pf', found '{magic}'")));
    }
    let width: usize = next_token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad width"))?;
    let height: usize = next_token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let scale: f64 = next_token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad scale line"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale line must be a non-zero finite number"));
    }
    // Exactly one whitespace byte separates the header from the samples.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing header terminator"));
    }
    pos += 1;
    Ok(Header {
        width,
        height,
        endian: if scale < 0.0 { Endian::Little } else { Endian::Big },
        data_offset: pos,
    })
}

pub fn decode_pfm(path: &Path, bytes: &[u8]) -> Result<FloatRaster> {
    let h = parse_header(path, bytes)?;
    let n = h
        .width
        .checked_mul(h.height)
        .ok_or_else(|| Error::format(path, "raster size overflows"))?;
    let body = &bytes[h.data_offset..];
    if body.len() != n * 4 {
        return Err(Error::format(
            path,
            format!("expected {} sample bytes, found {}", n * 4, body.len()),
        ));
    }
    let mut data = vec![0f32; n];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = match h.endian {
            Endian::Little => f32::from_le_bytes(raw),
            Endian::Big => f32::from_be_bytes(raw),
        };
        // file row r counts from the bottom
        let (file_row, col) = (i / h.width, i % h.width);
        let row = h.height - 1 - file_row;
        data[row * h.width + col] = v;
    }
    Ok(FloatRaster {
        width: h.width,
        height: h.height,
        data,
    })
}

pub fn encode_pfm(raster: &FloatRaster, endian: Endian) -> Vec<u8> {
    let scale = match endian {
        Endian::Little => "-1.0",
        Endian::Big => "1.0",
    };
    let mut out = format!("Pf\n{} {}\n{}\n", raster.width, raster.height, scale).into_bytes();
    out.reserve(raster.data.len() * 4);
    for row in (0..raster.height).rev() {
        for v in &raster.data[row * raster.width..(row + 1) * raster.width] {
            match endian {
                Endian::Little => out.extend_from_slice(&v.to_le_bytes()),
                Endian::Big => out.extend_from_slice(&v.to_be_bytes()),
            }
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FloatRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(path, &bytes)
}

/// Reads only the header; used for cheap manifest validation.
pub fn read_pfm_dims(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let h = parse_header(path, &bytes)?;
    Ok((h.width, h.height))
}

pub fn write_pfm(raster: &FloatRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm(raster, Endian::Little)).map_err(|e| Error::io(path, e))
}

/// Loads a depth raster and checks it against the expected intrinsics.
pub fn load_depth(path: impl AsRef<Path>, frame_id: usize, intrinsics: Intrinsics) -> Result<DepthFrame> {
    let path = path.as_ref();
    let raster = read_pfm(path)?;
    if raster.width != intrinsics.width || raster.height != intrinsics.height {
        return Err(Error::Consistency(format!(
            "{}: depth is {}x{}, manifest expects {}x{}",
            path.display(),
            raster.width,
            raster.height,
            intrinsics.width,
            intrinsics.height
        )));
    }
    let values: Vec<f64> = raster.data.iter().map(|&z| z as f64).collect();
    DepthFrame::new(frame_id, values, intrinsics)
}

/// Writes depth as 32-bit floats. Values that are not representable in f32
/// are rounded.
pub fn save_depth(frame: &DepthFrame, path: impl AsRef<Path>) -> Result<()> {
    let raster = FloatRaster {
        width: frame.width(),
        height: frame.height(),
        data: frame.values().iter().map(|&z| z as f32).collect(),
    };
    write_pfm(&raster, path)
}
