//! Raster and kernel file formats.
//!
//! Images are 16-bit binary PGM (`P5`, maxval 65535) with intensities in
//! `[0, 1]`; 8-bit PGM and grayscale PNG are also read. Kernels are plain
//! text: a `kh kw` line followed by `kh` rows of `kw` reals.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::field::KernelField;
use crate::error::{FimaError, Result};

/// Writes `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| FimaError::Io(e.error))?;
    Ok(())
}

pub fn encode_pgm16(image: &Array2<f64>) -> Vec<u8> {
    let (h, w) = image.dim();
    let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
    bytes.reserve(2 * h * w);
    for v in image.iter() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    bytes
}

pub fn write_pgm16(path: &Path, image: &Array2<f64>) -> Result<()> {
    write_atomic(path, &encode_pgm16(image))
}

fn header_tokens(bytes: &[u8]) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(FimaError::Parse("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates header and data
    Ok((tokens, i + 1))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Array2<f64>> {
    let (tokens, offset) = header_tokens(bytes)?;
    if tokens[0] != "P5" {
        return Err(FimaError::Parse(format!("unsupported PGM magic `{}`", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| FimaError::Parse(format!("bad PGM header field `{s}`")));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(FimaError::Parse(format!("bad PGM geometry {w}x{h} maxval {maxval}")));
    }
    let wide = maxval > 255;
    let need = h * w * if wide { 2 } else { 1 };
    let data = bytes.get(offset..offset + need).ok_or_else(|| FimaError::Parse("truncated PGM data".into()))?;
    let scale = 1.0 / maxval as f64;
    let values: Vec<f64> = if wide {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale).collect()
    } else {
        data.iter().map(|&b| b as f64 * scale).collect()
    };
    Ok(Array2::from_shape_vec((h, w), values).expect("length checked"))
}

pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    decode_pgm(&fs::read(path)?)
}

/// Reads a PGM, or any grayscale/color PNG converted to 16-bit luma.
pub fn read_raster(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    let img = image::load_from_memory(&bytes).map_err(|e| FimaError::Parse(format!("{}: {e}", path.display())))?;
    let luma = img.into_luma16();
    let (w, h) = luma.dimensions();
    let values = luma.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
    Ok(Array2::from_shape_vec((h as usize, w as usize), values).expect("image dimensions"))
}

pub fn encode_kernel(kernel: &KernelField) -> String {
    let (kh, kw) = kernel.dim();
    let mut out = format!("{kh} {kw}\n");
    for row in kernel.taps().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_kernel(text: &str) -> Result<KernelField> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head = lines.next().ok_or_else(|| FimaError::Parse("empty kernel file".into()))?;
    let dims: Vec<usize> = head
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| FimaError::Parse(format!("bad kernel header `{head}`"))))
        .collect::<Result<_>>()?;
    let [kh, kw] = dims[..] else {
        return Err(FimaError::Parse(format!("kernel header must be `kh kw`, got `{head}`")));
    };
    let mut taps = Vec::with_capacity(kh * kw);
    for r in 0..kh {
        let line = lines.next().ok_or_else(|| FimaError::Parse(format!("kernel file has {r} rows, expected {kh}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| FimaError::Parse(format!("bad kernel tap `{t}`"))))
            .collect::<Result<_>>()?;
        if row.len() != kw {
            return Err(FimaError::Parse(format!("kernel row {r} has {} taps, expected {kw}", row.len())));
        }
        taps.extend(row);
    }
    KernelField::new(Array2::from_shape_vec((kh, kw), taps).expect("length checked"))
}

pub fn read_kernel(path: &Path) -> Result<KernelField> {
    decode_kernel(&fs::read_to_string(path)?)
}

pub fn write_kernel(path: &Path, kernel: &KernelField) -> Result<()> {
    write_atomic(path, encode_kernel(kernel).as_bytes())
}
