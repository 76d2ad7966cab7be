//! Binary portable graymap (P5) I/O.
//!
//! 8-bit images declare maxval 255, 16-bit images 65535 with big-endian
//! samples. The writer emits no comments so files are byte-for-byte
//! reproducible.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::unwrap::{BitDepth, TileImage};

pub fn encode(img: &TileImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), img.max_value());
    let bytes_per = if img.bit_depth() == BitDepth::Eight { 1 } else { 2 };
    let mut out = Vec::with_capacity(header.len() + img.pixels().len() * bytes_per);
    out.extend_from_slice(header.as_bytes());
    match img.bit_depth() {
        BitDepth::Eight => out.extend(img.pixels().iter().map(|&v| v as u8)),
        BitDepth::Sixteen => {
            for &v in img.pixels() {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    out
}

/// Parse a P5 image. Pixel pitch is set to 1 µm and the tile index to
/// `(0, 0)`; callers fill those in from the manifest.
pub fn decode(data: &[u8]) -> Result<TileImage> {
    let mut pos = 0usize;
    let magic = token(data, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let width = number(data, &mut pos, "width")?;
    let height = number(data, &mut pos, "height")?;
    let maxval = number(data, &mut pos, "maxval")?;
    // exactly one whitespace byte separates the header from the raster
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated PGM header".into()));
    }
    pos += 1;

    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(Error::Format(format!("unsupported maxval {other}"))),
    };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let raster = &data[pos..];
    let pixels: Vec<u16> = match depth {
        BitDepth::Eight => {
            if raster.len() < n {
                return Err(Error::Format(format!(
                    "expected {n} pixel bytes, found {}",
                    raster.len()
                )));
            }
            raster[..n].iter().map(|&b| b as u16).collect()
        }
        BitDepth::Sixteen => {
            if raster.len() < 2 * n {
                return Err(Error::Format(format!(
                    "expected {} pixel bytes, found {}",
                    2 * n,
                    raster.len()
                )));
            }
            raster[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        }
    };
    TileImage::new(width, height, depth, pixels, 1.0, 1.0)
}

fn skip_space_and_comments(data: &[u8], pos: &mut usize) {
    while *pos < data.len() {
        if data[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else if data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    skip_space_and_comments(data, pos);
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&data[start..*pos])
}

fn number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = token(data, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&v: &usize| v > 0)
        .ok_or_else(|| Error::Format(format!("bad PGM {what}")))
}

pub fn write(path: &Path, img: &TileImage) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(img))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<TileImage> {
    let data = fs::read(path)?;
    decode(&data).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
