//! PNG and raw `PDT1` tensor files.
//!
//! `PDT1` layout: ASCII magic `PDT1`, then little-endian `u32` channels,
//! height, width, then `channels * height * width` little-endian `f64`
//! samples in planar row-major order. It is lossless, so consistency can be
//! measured before any 8-bit truncation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{quantize_sample, ImageTensor, Shape};

pub const RAW_MAGIC: &[u8; 4] = b"PDT1";
pub const RAW_HEADER_LEN: usize = 16;

pub fn load_png(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let unsupported = |reason: String| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| unsupported(e.to_string()))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        png::ColorType::GrayscaleAlpha | png::ColorType::Rgba => {
            return Err(unsupported("alpha channels are not accepted".into()))
        }
        png::ColorType::Indexed => {
            return Err(unsupported("palette images are not accepted".into()))
        }
    };
    let (bytes_per_sample, full_scale) = match depth {
        png::BitDepth::Eight => (1, 255.0),
        png::BitDepth::Sixteen => (2, 65535.0),
        other => return Err(unsupported(format!("bit depth {other:?} is not 8 or 16"))),
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| unsupported("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| unsupported(e.to_string()))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let shape = Shape::new(channels, height, width);

    // interleaved -> planar
    let mut data = vec![0.0; shape.len()];
    for row in 0..height {
        let line = &buf[row * frame.line_size..];
        for col in 0..width {
            for c in 0..channels {
                let at = (col * channels + c) * bytes_per_sample;
                let raw = if bytes_per_sample == 1 {
                    f64::from(line[at])
                } else {
                    f64::from(u16::from_be_bytes([line[at], line[at + 1]]))
                };
                data[(c * height + row) * width + col] = raw / full_scale;
            }
        }
    }
    ImageTensor::from_shape(shape, data)
}

/// Writes an 8-bit PNG; every sample becomes `round(clamp(v, 0, 1) * 255)`.
pub fn save_png(t: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match t.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(Error::InvalidArgument(format!(
                "PNG output needs 1 or 3 channels, tensor has {c}"
            )))
        }
    };
    let (h, w, ch) = (t.height(), t.width(), t.channels());
    let mut bytes = vec![0u8; h * w * ch];
    for c in 0..ch {
        for (i, &v) in t.plane(c).iter().enumerate() {
            bytes[i * ch + c] = quantize_sample(v);
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encode_err = |source| Error::PngEncode {
        path: path.to_path_buf(),
        source,
    };
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

pub fn encode_raw(t: &ImageTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + t.data().len() * 8);
    out.extend_from_slice(RAW_MAGIC);
    for dim in [t.channels(), t.height(), t.width()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8], path: &Path) -> Result<ImageTensor> {
    let bad = |reason: String| Error::BadFormat {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(bad("missing PDT1 magic".into()));
    }
    let dim =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let shape = Shape::new(dim(0), dim(1), dim(2));
    let payload = &bytes[RAW_HEADER_LEN..];
    if payload.len() != shape.len() * 8 {
        return Err(bad(format!(
            "header says {shape} ({} bytes of samples), payload has {} bytes",
            shape.len() * 8,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ImageTensor::from_shape(shape, data).map_err(|e| bad(e.to_string()))
}

pub fn write_raw(t: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    file.write_all(&encode_raw(t))
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raw(&bytes, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Png,
    Raw,
}

/// Sniffs the file's magic bytes.
pub fn detect_format(path: impl AsRef<Path>) -> Result<FileFormat> {
    let path = path.as_ref();
    let mut head = [0u8; 8];
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let n = file.read(&mut head).map_err(|e| Error::io(path, e))?;
    if n >= 4 && &head[..4] == RAW_MAGIC {
        Ok(FileFormat::Raw)
    } else if n == 8 && head == [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a] {
        Ok(FileFormat::Png)
    } else {
        Err(Error::BadFormat {
            path: path.to_path_buf(),
            reason: "neither PNG nor PDT1".into(),
        })
    }
}

/// Loads a PNG or PDT1 file, whichever the magic bytes say.
pub fn load_any(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    match detect_format(path)? {
        FileFormat::Png => load_png(path),
        FileFormat::Raw => read_raw(path),
    }
}

pub fn save_as(t: &ImageTensor, path: impl AsRef<Path>, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Png => save_png(t, path),
        FileFormat::Raw => write_raw(t, path),
    }
}
