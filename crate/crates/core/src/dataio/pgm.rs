//! Binary (P5) portable graymap reader/writer and a grid-montage builder.
//!
//! The writer emits exactly `P5\n{w} {h}\n{maxval}\n` followed by the
//! raster, so output bytes are reproducible. 16-bit samples are big-endian,
//! following the format convention.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::Patch;

/// 2-D grayscale image; `maxval` is 255 (8-bit) or 65535 (16-bit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Self {
        assert!(maxval == 255 || maxval == 65535);
        assert_eq!(pixels.len(), width * height);
        GrayImage {
            width,
            height,
            maxval,
            pixels,
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u16 {
        self.pixels[y * self.width + x]
    }
}

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        msg: msg.into(),
    }
}

/// Skip ASCII whitespace, returning the index of the next non-space byte.
fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

fn read_uint(bytes: &[u8], start: usize) -> Result<(u64, usize)> {
    let i = skip_ws(bytes, start);
    let mut j = i;
    let mut v: u64 = 0;
    while j < bytes.len() && bytes[j].is_ascii_digit() {
        v = v
            .checked_mul(10)
            .and_then(|v| v.checked_add((bytes[j] - b'0') as u64))
            .ok_or_else(|| parse_err(i, "integer overflow in header"))?;
        j += 1;
    }
    if j == i {
        return Err(parse_err(i, "expected unsigned integer in header"));
    }
    Ok((v, j))
}

pub fn read_pgm_bytes(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(parse_err(0, "missing P5 magic"));
    }
    let (w, i) = read_uint(bytes, 2)?;
    let (h, i) = read_uint(bytes, i)?;
    let (maxval, i) = read_uint(bytes, i)?;
    if maxval != 255 && maxval != 65535 {
        return Err(parse_err(i, format!("maxval {maxval} not in {{255, 65535}}")));
    }
    if w == 0 || h == 0 {
        return Err(parse_err(2, "zero image dimension"));
    }
    // exactly one whitespace byte separates header from raster
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(parse_err(i, "expected whitespace before raster"));
    }
    let raster = i + 1;
    let (w, h) = (w as usize, h as usize);
    let n = w * h;
    let bytes_per = if maxval == 255 { 1 } else { 2 };
    let need = n * bytes_per;
    if bytes.len() - raster < need {
        return Err(parse_err(
            bytes.len(),
            format!("truncated raster: need {need} bytes, have {}", bytes.len() - raster),
        ));
    }
    let mut pixels = Vec::with_capacity(n);
    if bytes_per == 1 {
        pixels.extend(bytes[raster..raster + n].iter().map(|&b| b as u16));
    } else {
        for k in 0..n {
            let hi = bytes[raster + 2 * k] as u16;
            let lo = bytes[raster + 2 * k + 1] as u16;
            pixels.push(hi << 8 | lo);
        }
    }
    Ok(GrayImage::new(w, h, maxval as u16, pixels))
}

pub fn write_pgm_bytes(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval == 255 {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    } else {
        for &p in &img.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    }
    out
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    read_pgm_bytes(&std::fs::read(path)?)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    std::fs::write(path, write_pgm_bytes(img))?;
    Ok(())
}

/// Tile equal-sized patches into a grid with 2-pixel black separators.
pub fn montage(patches: &[Patch], cols: usize) -> GrayImage {
    const SEP: usize = 2;
    assert!(!patches.is_empty() && cols > 0);
    let size = patches[0].size;
    let maxval = patches[0].max_value();
    let rows = patches.len().div_ceil(cols);
    let width = cols * size + (cols - 1) * SEP;
    let height = rows * size + (rows - 1) * SEP;
    let mut pixels = vec![0u16; width * height];
    for (i, p) in patches.iter().enumerate() {
        assert_eq!(p.size, size, "montage requires equal patch sizes");
        let (r, c) = (i / cols, i % cols);
        let oy = r * (size + SEP);
        let ox = c * (size + SEP);
        for y in 0..size {
            let dst = (oy + y) * width + ox;
            pixels[dst..dst + size].copy_from_slice(&p.pixels[y * size..(y + 1) * size]);
        }
    }
    GrayImage::new(width, height, maxval, pixels)
}
