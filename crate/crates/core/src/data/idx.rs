//! IDX image and label files: a big-endian magic (`0x00000803` for images,
//! `0x00000801` for labels), big-endian `u32` dimensions, then unsigned bytes.

use crate::error::{Error, Result};

pub const IDX3_MAGIC: u32 = 0x0000_0803;
pub const IDX1_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(bytes.len() as u64, format!("file ends inside the header field at offset {offset}")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::format(0, format!("bad magic {magic:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

fn check_body(bytes: &[u8], header: usize, need: usize) -> Result<&[u8]> {
    let body = &bytes[header..];
    if body.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("expected {need} data bytes after the header, found {}", body.len()),
        ));
    }
    if body.len() > need {
        return Err(Error::format((header + need) as u64, "trailing bytes after the data"));
    }
    Ok(body)
}

pub fn parse_idx3(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IDX3_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(4, "image dimensions overflow"))?;
    let body = check_body(bytes, 16, need)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_idx1(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX1_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(check_body(bytes, 8, count)?.to_vec())
}

fn u32_field(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_be_bytes)
        .map_err(|_| Error::invalid(format!("{v} does not fit an IDX header field")))
}

pub fn serialize_idx3(images: &IdxImages) -> Result<Vec<u8>> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::Dimension {
            what: "IDX pixel buffer",
            expected: images.count * images.rows * images.cols,
            got: images.pixels.len(),
        });
    }
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IDX3_MAGIC.to_be_bytes());
    for v in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&u32_field(v)?);
    }
    out.extend_from_slice(&images.pixels);
    Ok(out)
}

pub fn serialize_idx1(labels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX1_MAGIC.to_be_bytes());
    out.extend_from_slice(&u32_field(labels.len())?);
    out.extend_from_slice(labels);
    Ok(out)
}
