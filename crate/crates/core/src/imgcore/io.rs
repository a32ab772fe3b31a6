//! Raster file formats.
//!
//! * Raw: little-endian `f32`, row-major, in `<name>.f32`, with a JSON
//!   sidecar `<name>.json` holding `{"width": W, "height": H}`.
//! * PGM: binary `P5`. Export always writes 16-bit (maxval 65535) with a
//!   linear mapping from [0, 1]; import accepts 8- and 16-bit files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Image2D, Mask2D};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
}

pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

pub fn encode_raw_f32(img: &Image2D<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.len() * 4);
    for &v in img.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_raw_f32(bytes: &[u8], width: usize, height: usize) -> Result<Image2D<f64>> {
    if bytes.len() != width * height * 4 {
        return Err(Error::Data(format!(
            "raw raster of {width}x{height} needs {} bytes, got {}",
            width * height * 4,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image2D::new(width, height, data)
}

/// Write `<path>` (raw f32) and its `.json` sidecar.
pub fn write_raw(path: &Path, img: &Image2D<f64>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_raw_f32(img)).map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        width: img.width(),
        height: img.height(),
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_vec(&sidecar)?).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<Image2D<f64>> {
    let side = sidecar_path(path);
    let text = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar = serde_json::from_slice(&text)
        .map_err(|e| Error::Data(format!("bad sidecar {}: {e}", side.display())))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raw_f32(&bytes, sidecar.width, sidecar.height)
}

/// Masks are stored as raw f32 rasters of 0/1.
pub fn write_mask(path: &Path, mask: &Mask2D) -> Result<()> {
    write_raw(path, &mask.to_image())
}

pub fn read_mask(path: &Path) -> Result<Mask2D> {
    let img = read_raw(path)?;
    Mask2D::new(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > 0.5).collect(),
    )
}

pub fn encode_pgm16(img: &Image2D<f64>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    for &v in img.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn write_pgm16(path: &Path, img: &Image2D<f64>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_pgm16(img)).map_err(|e| Error::io(path, e))
}

/// Parse a binary PGM. Values are returned as raw sample counts (not scaled).
pub fn decode_pgm(bytes: &[u8]) -> Result<Image2D<f64>> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Data("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = next_token(bytes)?;
    if magic != "P5" {
        return Err(Error::Data(format!("unsupported PGM magic {magic:?}")));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Data(format!("bad PGM header field {s:?}")))
    };
    let width = parse(next_token(bytes)?)?;
    let height = parse(next_token(bytes)?)?;
    let maxval = parse(next_token(bytes)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Data(format!("bad PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the samples
    let body = &bytes[(pos + 1).min(bytes.len())..];
    let n = width * height;
    let data: Vec<f64> = if maxval < 256 {
        if body.len() < n {
            return Err(Error::Data("truncated PGM body".into()));
        }
        body[..n].iter().map(|&b| b as f64).collect()
    } else {
        if body.len() < 2 * n {
            return Err(Error::Data("truncated PGM body".into()));
        }
        body[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    Image2D::new(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<Image2D<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image2D::from_fn(5, 3, |x, y| (x as f64 * 0.1 + y as f64 * 0.37).fract());
        let p = dir.path().join("a.f32");
        write_raw(&p, &img).unwrap();
        let back = read_raw(&p).unwrap();
        assert_eq!(back.dims(), (5, 3));
        assert!(back.max_abs_diff(&img).unwrap() <= 1e-7);
        let side: Sidecar =
            serde_json::from_slice(&fs::read(dir.path().join("a.json")).unwrap()).unwrap();
        assert_eq!(
            side,
            Sidecar {
                width: 5,
                height: 3
            }
        );
    }

    #[test]
    fn pgm16_round_trip() {
        let img = Image2D::from_fn(4, 2, |x, y| (x + 4 * y) as f64 / 7.0);
        let bytes = encode_pgm16(&img);
        assert!(bytes.starts_with(b"P5\n4 2\n65535\n"));
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back.get(3, 1), 65535.0);
        assert_eq!(back.get(0, 0), 0.0);
    }

    #[test]
    fn pgm8_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 10, 20, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 10.0, 20.0, 255.0]);
    }

    #[test]
    fn rejects_short_raw() {
        assert!(decode_raw_f32(&[0u8; 7], 1, 2).is_err());
    }
}
