//! PNG (8/16-bit grayscale) and binary PGM reading and writing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GrayImage, ImageError};

#[derive(Clone, Copy, Debug, Default)]
pub struct ReadOptions {
    /// Average RGB(A) channels instead of rejecting color images.
    pub average_channels: bool,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ImageError + '_ {
    move |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> ImageError {
    ImageError::Unsupported {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> ImageError {
    ImageError::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn read_image(path: &Path) -> Result<GrayImage, ImageError> {
    read_image_with(path, ReadOptions::default())
}

pub fn read_image_with(path: &Path, options: ReadOptions) -> Result<GrayImage, ImageError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(path, &bytes, options)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(path, &bytes)
    } else {
        Err(unsupported(path, "unrecognized file signature"))
    }
}

fn decode_png(path: &Path, bytes: &[u8], options: ReadOptions) -> Result<GrayImage, ImageError> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder
        .read_info()
        .map_err(|e| malformed(path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| malformed(path, e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let (max, sample_bytes) = match info.bit_depth {
        png::BitDepth::Eight => (255u16, 1),
        png::BitDepth::Sixteen => (65535u16, 2),
        other => return Err(unsupported(path, format!("{other:?}-bit samples"))),
    };
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha if options.average_channels => 2,
        png::ColorType::Rgb if options.average_channels => 3,
        png::ColorType::Rgba if options.average_channels => 4,
        png::ColorType::Indexed => return Err(unsupported(path, "palette images are not grayscale")),
        other => {
            return Err(unsupported(
                path,
                format!("color type {other:?}; a single-channel grayscale image is required (or enable channel averaging)"),
            ))
        }
    };
    let color_channels = if channels == 2 || channels == 4 {
        channels - 1
    } else {
        channels
    };
    let sample = |i: usize| -> f64 {
        if sample_bytes == 1 {
            buf[i] as f64
        } else {
            u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f64
        }
    };
    let m = max as f64;
    let pixels = (0..w * h)
        .map(|p| {
            let base = p * channels;
            (0..color_channels).map(|c| sample(base + c)).sum::<f64>() / color_channels as f64 / m
        })
        .collect();
    Ok(GrayImage::new(w, h, pixels)?.with_max_value(max))
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(malformed(path, "header ends early")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(path, "expected a number in the header"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(malformed(path, "missing whitespace after maxval"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(unsupported(path, format!("maxval {maxval}")));
    }
    let wide = maxval > 255;
    let need = w * h * if wide { 2 } else { 1 };
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(malformed(
            path,
            format!("expected {need} data bytes, found {}", data.len()),
        ));
    }
    let m = maxval as f64;
    let pixels = (0..w * h)
        .map(|i| if wide { u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as f64 } else { data[i] as f64 } / m)
        .collect();
    Ok(GrayImage::new(w, h, pixels)?.with_max_value(maxval as u16))
}

fn quantize(v: f64, max: u16) -> u16 {
    (v.clamp(0.0, 1.0) * max as f64).round() as u16
}

/// Writes PGM when the extension is `.pgm`, PNG otherwise. Values are
/// clamped to `[0, 1]` and rounded to the image's integer scale; PNG output
/// uses 8 bits when that scale fits, 16 otherwise.
pub fn write_image(img: &GrayImage, path: &Path) -> Result<(), ImageError> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    if is_pgm {
        let max = img.max_value();
        write!(out, "P5\n{} {}\n{}\n", img.width(), img.height(), max).map_err(io_err(path))?;
        let mut data = Vec::with_capacity(img.len() * 2);
        for &v in img.pixels() {
            let q = quantize(v, max);
            if max > 255 {
                data.extend_from_slice(&q.to_be_bytes());
            } else {
                data.push(q as u8);
            }
        }
        out.write_all(&data).map_err(io_err(path))?;
    } else {
        let eight = img.max_value() <= 255;
        let (depth, max) = if eight {
            (png::BitDepth::Eight, 255)
        } else {
            (png::BitDepth::Sixteen, 65535)
        };
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let mut writer = enc
            .write_header()
            .map_err(|e| malformed(path, e.to_string()))?;
        let mut data = Vec::with_capacity(img.len() * 2);
        for &v in img.pixels() {
            let q = quantize(v, max);
            if eight {
                data.push(q as u8);
            } else {
                data.extend_from_slice(&q.to_be_bytes());
            }
        }
        writer
            .write_image_data(&data)
            .map_err(|e| malformed(path, e.to_string()))?;
        writer
            .finish()
            .map_err(|e| malformed(path, e.to_string()))?;
    }
    out.flush().map_err(io_err(path))
}
