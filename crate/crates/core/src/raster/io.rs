//! Binary PGM (P5) and PFM readers/writers.
//!
//! PGM carries 8-bit images (maxval 255 only); PFM carries float rasters,
//! written little-endian with scale -1.0 and the conventional bottom-to-top
//! row order. `PF` (3-channel) files are used for two-component fields with
//! a zero third channel.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Load a binary PGM (P5, maxval 255). Intensities are scaled into `[0, 1]`.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Save as binary PGM. Values are clamped to `[0, 1]` and quantized with
/// `round(v * 255)`, so a save/load round trip moves no pixel by more than
/// `1/510`.
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + img.len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend(img.data().iter().map(|&v| quantize_u8(v)));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[inline]
pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let header_err = |reason: String| Error::MalformedHeader {
        format: "pgm",
        reason,
    };

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(header_err("missing P5 magic".into()));
    }
    let mut pos = 2;
    let width = parse_ascii_uint(bytes, &mut pos).ok_or_else(|| header_err("bad width".into()))?;
    let height =
        parse_ascii_uint(bytes, &mut pos).ok_or_else(|| header_err("bad height".into()))?;
    let maxval =
        parse_ascii_uint(bytes, &mut pos).ok_or_else(|| header_err("bad maxval".into()))?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            height: height as usize,
            width: width as usize,
        });
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(header_err("missing separator before payload".into()));
    }
    pos += 1;

    let (w, h) = (width as usize, height as usize);
    let expected = w * h;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    let data = payload[..expected]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    GrayImage::from_vec(h, w, data)
}

/// Parse an unsigned ASCII integer, skipping leading whitespace and `#`
/// comment lines (standard PNM header lexing). Leaves `pos` just past the
/// last digit.
fn parse_ascii_uint(bytes: &[u8], pos: &mut usize) -> Option<u64> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Float planes decoded from a PFM file.
pub struct PfmPlanes {
    pub height: usize,
    pub width: usize,
    /// One plane for `Pf`, three (RGB) for `PF`; each row-major, top-down.
    pub planes: Vec<Vec<f64>>,
}

/// Load a PFM file (`Pf` grayscale or `PF` color). Both endiannesses are
/// accepted; rows are flipped from the file's bottom-up order.
pub fn load_pfm(path: impl AsRef<Path>) -> Result<PfmPlanes> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes)
}

/// Write float planes as PFM (little-endian, scale -1.0). One plane writes
/// `Pf`, three write `PF`.
pub fn save_pfm(planes: &PfmPlanes, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let channels = planes.planes.len();
    let magic = match channels {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(Error::InvalidParameter(format!(
                "pfm supports 1 or 3 planes, got {n}"
            )))
        }
    };
    let (h, w) = (planes.height, planes.width);
    for p in &planes.planes {
        if p.len() != h * w {
            return Err(Error::InvalidParameter(
                "pfm plane length does not match dimensions".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(32 + channels * h * w * 4);
    out.extend_from_slice(format!("{magic}\n{w} {h}\n-1.0\n").as_bytes());
    // Bottom-to-top row order, channels interleaved per pixel.
    for y in (0..h).rev() {
        for x in 0..w {
            for p in &planes.planes {
                out.extend_from_slice(&(p[y * w + x] as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Save a single float raster as `Pf`.
pub fn save_pfm_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    save_pfm(
        &PfmPlanes {
            height: img.height(),
            width: img.width(),
            planes: vec![img.data().to_vec()],
        },
        path,
    )
}

/// Load a `Pf` raster as a [`GrayImage`] (values may lie outside `[0, 1]`).
pub fn load_pfm_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let planes = load_pfm(path)?;
    if planes.planes.len() != 1 {
        return Err(Error::MalformedHeader {
            format: "pfm",
            reason: "expected single-channel Pf".into(),
        });
    }
    GrayImage::from_vec(
        planes.height,
        planes.width,
        planes.planes.into_iter().next().unwrap(),
    )
}

fn parse_pfm(bytes: &[u8]) -> Result<PfmPlanes> {
    let header_err = |reason: String| Error::MalformedHeader {
        format: "pfm",
        reason,
    };

    let channels = match bytes.get(0..2) {
        Some(b"Pf") => 1,
        Some(b"PF") => 3,
        _ => return Err(header_err("missing Pf/PF magic".into())),
    };
    let mut pos = 2;
    let width = parse_ascii_uint(bytes, &mut pos).ok_or_else(|| header_err("bad width".into()))?
        as usize;
    let height = parse_ascii_uint(bytes, &mut pos).ok_or_else(|| header_err("bad height".into()))?
        as usize;
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { height, width });
    }
    let scale = parse_ascii_float(bytes, &mut pos).ok_or_else(|| header_err("bad scale".into()))?;
    if scale == 0.0 {
        return Err(header_err("scale must be nonzero".into()));
    }
    let little_endian = scale < 0.0;
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(header_err("missing separator before payload".into()));
    }
    pos += 1;

    let expected = width * height * channels * 4;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }

    let mut planes = vec![vec![0.0f64; width * height]; channels];
    let mut offset = 0;
    for file_row in 0..height {
        let y = height - 1 - file_row; // bottom-up storage
        for x in 0..width {
            for plane in planes.iter_mut() {
                let raw: [u8; 4] = payload[offset..offset + 4].try_into().unwrap();
                let v = if little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                if !v.is_finite() {
                    return Err(Error::NonFinite("pfm payload"));
                }
                plane[y * width + x] = f64::from(v);
                offset += 4;
            }
        }
    }
    Ok(PfmPlanes {
        height,
        width,
        planes,
    })
}

fn parse_ascii_float(bytes: &[u8], pos: &mut usize) -> Option<f64> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}
