//! Reading and writing grayscale rasters (binary PGM and PNG) and cube
//! manifests.
//!
//! Samples are mapped to `[0, 1]` on load by dividing by the format's
//! maximum value. Output is always 8-bit with `round(v * 255)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Band, GrayImage, SpectralCube};
use crate::segmentation::BinaryImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Pgm,
    Png,
}

fn format_from_extension(path: &Path) -> Option<Format> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "pgm" => Some(Format::Pgm),
        "png" => Some(Format::Png),
        _ => None,
    }
}

/// Loads an 8/16-bit grayscale PGM (P5) or PNG. The format is sniffed from
/// the file's magic bytes, not its extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|reason| match reason {
        DecodeError::Format(reason) => Error::format(path, reason),
        DecodeError::Image(e) => e,
    })
}

enum DecodeError {
    Format(String),
    Image(Error),
}

impl From<String> for DecodeError {
    fn from(s: String) -> Self {
        DecodeError::Format(s)
    }
}

fn decode_image(bytes: &[u8]) -> std::result::Result<GrayImage, DecodeError> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes)
    } else {
        Err(DecodeError::Format(
            "expected binary PGM (P5) or PNG".to_string(),
        ))
    }
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, DecodeError> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and `#` comments may separate header tokens
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
            return Err("truncated PGM header".to_string().into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "PGM header value out of range".to_string())?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed PGM header".to_string().into());
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(DecodeError::Image(Error::EmptyImage { width, height }));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("PGM maxval {maxval} outside 1..=65535").into());
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| "PGM dimensions overflow".to_string())?;
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let raster = &bytes[pos..];
    if raster.len() < n * bytes_per_sample {
        return Err(format!(
            "PGM raster holds {} bytes, expected {}",
            raster.len(),
            n * bytes_per_sample
        )
        .into());
    }
    let max = maxval as f64;
    let data: Vec<f64> = if bytes_per_sample == 1 {
        raster[..n]
            .iter()
            .map(|&b| (b as f64 / max).min(1.0))
            .collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 / max).min(1.0))
            .collect()
    };
    GrayImage::new(width, height, data).map_err(DecodeError::Image)
}

fn decode_png(bytes: &[u8]) -> std::result::Result<GrayImage, DecodeError> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| "PNG too large".to_string())?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(format!("PNG color type {:?} is not grayscale", info.color_type).into());
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(DecodeError::Image(Error::EmptyImage { width, height }));
    }
    let mut data = Vec::with_capacity(width * height);
    for row in buf.chunks_exact(info.line_size).take(height) {
        match info.bit_depth {
            png::BitDepth::Sixteen => data.extend(
                row[..2 * width]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0),
            ),
            _ => data.extend(row[..width].iter().map(|&b| b as f64 / 255.0)),
        }
    }
    GrayImage::new(width, height, data).map_err(DecodeError::Image)
}

/// `round(v * 255)`. Fails on NaN or values outside `[0, 1]`.
pub fn quantize_u8(img: &GrayImage) -> Result<Vec<u8>> {
    img.as_slice()
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if (0.0..=1.0).contains(&value) {
                Ok((value * 255.0).round() as u8)
            } else {
                Err(Error::ValueOutOfRange { index, value })
            }
        })
        .collect()
}

/// Writes an 8-bit grayscale image. The format follows the extension
/// (`.pgm` or `.png`).
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = quantize_u8(img)?;
    write_u8(path, img.width(), img.height(), &bytes)
}

/// Writes a mask as 8-bit grayscale with foreground 255 and background 0.
pub fn save_mask(mask: &BinaryImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask
        .as_slice()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    write_u8(path.as_ref(), mask.width(), mask.height(), &bytes)
}

fn write_u8(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let format = format_from_extension(path)
        .ok_or_else(|| Error::format(path, "output extension must be .pgm or .png"))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Pgm => {
            write!(out, "P5\n{width} {height}\n255\n").map_err(|e| Error::io(path, e))?;
            out.write_all(bytes).map_err(|e| Error::io(path, e))?;
        }
        Format::Png => {
            let too_big = || Error::format(path, "image too large for PNG");
            let w = u32::try_from(width).map_err(|_| too_big())?;
            let h = u32::try_from(height).map_err(|_| too_big())?;
            let mut encoder = png::Encoder::new(&mut out, w, h);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            let to_err = |e: png::EncodingError| match e {
                png::EncodingError::IoError(io) => Error::io(path, io),
                other => Error::format(path, other.to_string()),
            };
            let mut writer = encoder.write_header().map_err(to_err)?;
            writer.write_image_data(bytes).map_err(to_err)?;
            writer.finish().map_err(to_err)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Loads a cube from a manifest: one `wavelength_nm<TAB>path` per line,
/// paths relative to the manifest's directory. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_cube(manifest: impl AsRef<Path>) -> Result<SpectralCube> {
    let manifest = manifest.as_ref();
    let file = File::open(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or_else(|| Path::new(""));

    let mut bands: Vec<Band> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(manifest, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| Error::MalformedManifest {
            line: line_no,
            reason,
        };
        let (nm, rel) = trimmed
            .split_once('\t')
            .ok_or_else(|| malformed("expected `wavelength_nm<TAB>path`".to_string()))?;
        let wavelength_nm: f64 = nm
            .trim()
            .parse()
            .ok()
            .filter(|w: &f64| w.is_finite())
            .ok_or_else(|| malformed(format!("unparsable wavelength `{}`", nm.trim())))?;
        let rel = rel.trim();
        if rel.is_empty() {
            return Err(malformed("missing image path".to_string()));
        }
        if bands.iter().any(|b| b.wavelength_nm == wavelength_nm) {
            return Err(Error::DuplicateWavelength(wavelength_nm));
        }
        let image = load_image(base.join(rel))?;
        if let Some(first) = bands.first() {
            if first.image.dimensions() != image.dimensions() {
                return Err(Error::DimensionMismatch {
                    expected: first.image.dimensions(),
                    actual: image.dimensions(),
                });
            }
        }
        bands.push(Band {
            wavelength_nm,
            image,
        });
    }
    SpectralCube::new(bands)
}

/// Decodes an in-memory PGM or PNG.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    decode_image(bytes).map_err(|e| match e {
        DecodeError::Format(reason) => Error::format("<memory>", reason),
        DecodeError::Image(e) => e,
    })
}

/// Reads all of `reader` and decodes it as PGM or PNG.
pub fn read_image(mut reader: impl Read) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<stream>", e))?;
    decode(&bytes)
}
