//! Raster images on disk: binary PGM (P5, 8-bit) both ways, PNG (8-bit gray
//! or RGB) on ingest and as an optional output.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grayscale, Grid, Mask, Shape};

/// How colour PNGs are turned into grayscale planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMode {
    /// One plane, `0.299 R + 0.587 G + 0.114 B`.
    #[default]
    Luminance,
    /// One plane per colour channel (R, G, B); gray inputs yield one plane.
    PerChannel,
}

/// Foreground cut-off used when reading masks: bytes `>= 128` are vessel.
pub const DEFAULT_MASK_THRESHOLD: u8 = 128;

pub fn decode_image(bytes: &[u8], mode: ColorMode) -> Result<Vec<Grayscale>> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes).map(|g| vec![g])
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes, mode)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && (b'1'..=b'7').contains(&bytes[1]) {
        Err(Error::UnsupportedFormat(format!(
            "Netpbm variant P{} (only binary P5 is supported)",
            bytes[1] as char
        )))
    } else {
        Err(Error::UnsupportedFormat("not a PGM (P5) or PNG file".into()))
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a single grayscale plane, converting colour PNGs by luminance.
pub fn read_image(path: impl AsRef<Path>) -> Result<Grayscale> {
    let mut planes = read_image_channels(path, ColorMode::Luminance)?;
    Ok(planes.remove(0))
}

pub fn read_image_channels(path: impl AsRef<Path>, mode: ColorMode) -> Result<Vec<Grayscale>> {
    decode_image(&read_bytes(path.as_ref())?, mode)
}

/// Reads a mask stored as {0, 255}; bytes at or above `threshold` become 1.
pub fn read_mask(path: impl AsRef<Path>, threshold: u8) -> Result<Mask> {
    let img = read_image(path)?;
    let data = img.data().iter().map(|&v| u8::from(v >= threshold as f64)).collect();
    Ok(Mask::from_raw(img.shape(), data))
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes PNG when the extension is `.png`, PGM P5 otherwise. Values are
/// rounded and clipped to [0, 255].
pub fn write_image(path: impl AsRef<Path>, img: &Grayscale) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
    write_bytes(path.as_ref(), img.shape(), &bytes)
}

/// Writes one plane (PGM or PNG by extension) or three planes as an RGB PNG.
pub fn write_image_channels(path: impl AsRef<Path>, planes: &[Grayscale]) -> Result<()> {
    let path = path.as_ref();
    match planes {
        [one] => write_image(path, one),
        [r, g, b] => {
            crate::grid::validate_shapes(r, g)?;
            crate::grid::validate_shapes(r, b)?;
            let is_png = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if !is_png {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: three-channel output must be written as .png",
                    path.display()
                )));
            }
            let bytes: Vec<u8> = (0..r.shape().len())
                .flat_map(|i| [r.data()[i], g.data()[i], b.data()[i]].map(to_byte))
                .collect();
            let out = encode_png_color(r.shape(), &bytes, png::ColorType::Rgb)?;
            fs::write(path, out).map_err(|e| Error::io(path, e))
        }
        _ => Err(Error::InvalidParameter(format!(
            "cannot write {} channels (expected 1 or 3)",
            planes.len()
        ))),
    }
}

/// Writes a mask as {0, 255}.
pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&m| if m != 0 { 255 } else { 0 }).collect();
    write_bytes(path.as_ref(), mask.shape(), &bytes)
}

fn write_bytes(path: &Path, shape: Shape, bytes: &[u8]) -> Result<()> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let out = if is_png {
        encode_png(shape, bytes)?
    } else {
        encode_pgm(shape, bytes)
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(shape: Shape, bytes: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", shape.width, shape.height).into_bytes();
    out.extend_from_slice(bytes);
    out
}

fn decode_pgm(bytes: &[u8]) -> Result<Grayscale> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptFile("malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptFile("PGM header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::CorruptFile(format!("PGM maxval {maxval} is invalid")));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("16-bit PGM (maxval {maxval})")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptFile("malformed PGM header".into()));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::CorruptFile("PGM dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < n {
        return Err(Error::CorruptFile(format!(
            "PGM pixel data has {} bytes, expected {n}",
            payload.len()
        )));
    }
    let scale = 255.0 / maxval as f64;
    let data = payload[..n]
        .iter()
        .map(|&b| {
            if maxval == 255 {
                b as f64
            } else {
                (b as f64 * scale).round()
            }
        })
        .collect();
    Ok(Grayscale::from_raw(Shape::new(height, width), data))
}

fn encode_png(shape: Shape, bytes: &[u8]) -> Result<Vec<u8>> {
    encode_png_color(shape, bytes, png::ColorType::Grayscale)
}

fn encode_png_color(shape: Shape, bytes: &[u8], color: png::ColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, shape.width as u32, shape.height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::InvalidParameter(format!("cannot encode PNG: {e}")))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| Error::InvalidParameter(format!("cannot encode PNG: {e}")))?;
    writer
        .finish()
        .map_err(|e| Error::InvalidParameter(format!("cannot encode PNG: {e}")))?;
    Ok(out)
}

fn decode_png(bytes: &[u8], mode: ColorMode) -> Result<Vec<Grayscale>> {
    let corrupt = |e: png::DecodingError| Error::CorruptFile(format!("PNG: {e}"));
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(corrupt)?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!("{}-bit PNG", depth as u8)));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::CorruptFile("PNG dimensions overflow".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(corrupt)?;
    let shape = Shape::new(info.height as usize, info.width as usize);
    let stride = info.line_size;
    let (bpp, rgb) = match color {
        png::ColorType::Grayscale => (1, false),
        png::ColorType::GrayscaleAlpha => (2, false),
        png::ColorType::Rgb => (3, true),
        png::ColorType::Rgba => (4, true),
        png::ColorType::Indexed => return Err(Error::UnsupportedFormat("unexpanded palette PNG".into())),
    };
    let sample = |r: usize, c: usize, ch: usize| buf[r * stride + c * bpp + ch] as f64;
    let plane = |f: &dyn Fn(usize, usize) -> f64| {
        let data = (0..shape.len()).map(|i| f(i / shape.width, i % shape.width)).collect();
        Grayscale::from_raw(shape, data)
    };
    Ok(match (rgb, mode) {
        (false, _) => vec![plane(&|r, c| sample(r, c, 0))],
        (true, ColorMode::Luminance) => vec![plane(&|r, c| {
            0.299 * sample(r, c, 0) + 0.587 * sample(r, c, 1) + 0.114 * sample(r, c, 2)
        })],
        (true, ColorMode::PerChannel) => (0..3).map(|ch| plane(&|r, c| sample(r, c, ch))).collect(),
    })
}
