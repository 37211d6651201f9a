//! IDX files (big-endian, MNIST convention): unsigned-byte label vectors
//! (magic `0x00000801`) and image stacks (magic `0x00000803`).

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const LABEL_MAGIC: u32 = 0x0000_0801;
const IMAGE_MAGIC: u32 = 0x0000_0803;

#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    /// One flattened image per row, pixels scaled to `[0, 1]`.
    pub images: Matrix,
    pub height: usize,
    pub width: usize,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    let bytes = read(path)?;
    if bytes.len() < 16 {
        return Err(Error::format(path, "truncated IDX image header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGE_MAGIC {
        return Err(Error::format(path, format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(&bytes, 4) as usize;
    let height = be_u32(&bytes, 8) as usize;
    let width = be_u32(&bytes, 12) as usize;
    let d = height * width;
    let body = &bytes[16..];
    if body.len() != n * d {
        return Err(Error::format(
            path,
            format!("expected {n}×{height}×{width} pixels, found {} bytes", body.len()),
        ));
    }
    let data = body.iter().map(|&b| b as f64 / 255.0).collect();
    Ok(IdxImages {
        images: Matrix::from_vec(n, d, data)?,
        height,
        width,
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = read(path)?;
    if bytes.len() < 8 {
        return Err(Error::format(path, "truncated IDX label header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABEL_MAGIC {
        return Err(Error::format(path, format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(&bytes, 4) as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(
            path,
            format!("expected {n} labels, found {} bytes", body.len()),
        ));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

/// Pixels are quantized to `round(255·v)` after clamping to `[0, 1]`.
pub fn write_images(path: &Path, images: &Matrix, height: usize, width: usize) -> Result<()> {
    if images.cols() != height * width {
        return Err(Error::Contract(format!(
            "{} columns cannot hold {height}×{width} images",
            images.cols()
        )));
    }
    let mut out = Vec::with_capacity(16 + images.len());
    for v in [IMAGE_MAGIC, images.rows() as u32, height as u32, width as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(images.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        let b = u8::try_from(l).map_err(|_| Error::Contract(format!("label {l} does not fit in a byte")))?;
        out.push(b);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
