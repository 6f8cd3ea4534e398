//! File formats: 8-bit grayscale/RGB images (PGM, PPM, PNG) and the STKS
//! k-space sample file.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::inpaint::PixelMask;
use crate::mri::KSpaceData;
use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const KSPACE_MAGIC: &[u8; 4] = b"STKS";
pub const KSPACE_HEADER_LEN: usize = 20;
/// Stored in the last header word, after the three dimension fields.
pub const KSPACE_VERSION: u32 = 1;

/// Loads an 8-bit image as doubles in `[0, 255]`. Grayscale inputs give one
/// channel, everything else is converted to RGB.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image<f64>> {
    let img = image::open(path)?;
    Ok(from_dynamic(img))
}

pub fn decode_image(bytes: &[u8]) -> Result<Image<f64>> {
    Ok(from_dynamic(image::load_from_memory(bytes)?))
}

fn from_dynamic(img: DynamicImage) -> Image<f64> {
    match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Image::from_fn(h as usize, w as usize, 1, |r, c, _| {
                g.get_pixel(c as u32, r as u32)[0] as f64
            })
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Image::from_fn(h as usize, w as usize, 3, |r, c, ch| {
                rgb.get_pixel(c as u32, r as u32)[ch] as f64
            })
        }
    }
}

/// Rounds and clamps to `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

fn to_dynamic(img: &Image<f64>) -> Result<DynamicImage> {
    let (h, w, ch) = img.dims();
    match ch {
        1 => {
            let buf = img.as_slice().iter().map(|&v| quantize(v)).collect();
            Ok(DynamicImage::ImageLuma8(
                GrayImage::from_raw(w as u32, h as u32, buf).expect("buffer matches dimensions"),
            ))
        }
        3 => {
            let mut buf = Vec::with_capacity(h * w * 3);
            for r in 0..h {
                for c in 0..w {
                    for k in 0..3 {
                        buf.push(quantize(img.at(r, c, k)));
                    }
                }
            }
            Ok(DynamicImage::ImageRgb8(
                RgbImage::from_raw(w as u32, h as u32, buf).expect("buffer matches dimensions"),
            ))
        }
        _ => Err(Error::DimensionMismatch(format!("cannot store a {ch}-channel image"))),
    }
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" | "" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        other => Err(Error::InvalidConfig(format!("unsupported image extension .{other}"))),
    }
}

/// Writes an 8-bit image; `.pgm`/`.ppm` select binary PNM, otherwise PNG.
pub fn write_image(path: impl AsRef<Path>, img: &Image<f64>) -> Result<()> {
    let path = path.as_ref();
    let format = format_for(path)?;
    if format == ImageFormat::Pnm {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let wanted = if img.channels() == 1 { "pgm" } else { "ppm" };
        if ext != "pnm" && ext != wanted {
            return Err(Error::InvalidConfig(format!(
                "a {}-channel image must be written as .{wanted}",
                img.channels()
            )));
        }
    }
    to_dynamic(img)?.save_with_format(path, format)?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<PixelMask> {
    PixelMask::from_image(&read_image(path)?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &PixelMask) -> Result<()> {
    write_image(path, &mask.to_image())
}

/// Writes the STKS header (magic, height, width, sample count, version)
/// followed by the samples as little-endian
/// `(re, im)` float64 pairs.
pub fn write_kspace<W: Write>(data: &KSpaceData, out: &mut W) -> Result<()> {
    let (h, w) = data.dims();
    let dims = [h, w, data.samples.len()]
        .map(|v| u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("dimension {v} exceeds u32"))));
    out.write_all(KSPACE_MAGIC)?;
    for d in dims {
        out.write_all(&d?.to_le_bytes())?;
    }
    out.write_all(&KSPACE_VERSION.to_le_bytes())?;
    for s in &data.samples {
        out.write_all(&s.re.to_le_bytes())?;
        out.write_all(&s.im.to_le_bytes())?;
    }
    Ok(())
}

/// Header fields of an STKS file: `(height, width, sample count)`.
pub fn read_kspace_header(bytes: &[u8]) -> Result<(usize, usize, usize)> {
    let err = |offset: usize, message: String| Error::Format {
        what: "k-space file",
        offset,
        message,
    };
    if bytes.len() < 4 || &bytes[..4] != KSPACE_MAGIC {
        let got: Vec<u8> = bytes.iter().take(4).copied().collect();
        return Err(err(0, format!("bad magic {got:?}, expected \"STKS\"")));
    }
    if bytes.len() < KSPACE_HEADER_LEN {
        return Err(err(bytes.len(), format!("truncated header of {} bytes", bytes.len())));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    if field(3) != KSPACE_VERSION {
        return Err(err(16, format!("unsupported version {}", field(3))));
    }
    Ok((field(0) as usize, field(1) as usize, field(2) as usize))
}

/// Parses an STKS file and pairs its samples with `mask`.
pub fn read_kspace<R: Read>(input: &mut R, mask: &PixelMask) -> Result<KSpaceData> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_kspace(&bytes, mask)
}

pub fn parse_kspace(bytes: &[u8], mask: &PixelMask) -> Result<KSpaceData> {
    let err = |offset: usize, message: String| Error::Format {
        what: "k-space file",
        offset,
        message,
    };
    let (h, w, q) = read_kspace_header(bytes)?;
    if (h, w) != (mask.height(), mask.width()) {
        return Err(err(
            4,
            format!(
                "header dims {h}x{w} do not match the {}x{} mask",
                mask.height(),
                mask.width()
            ),
        ));
    }
    if q != mask.available_count() {
        return Err(err(
            12,
            format!(
                "header sample count {q} but the mask samples {}",
                mask.available_count()
            ),
        ));
    }
    let expected = KSPACE_HEADER_LEN + 16 * q;
    if bytes.len() != expected {
        return Err(err(
            bytes.len().min(expected),
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let samples = bytes[KSPACE_HEADER_LEN..]
        .chunks_exact(16)
        .enumerate()
        .map(|(k, c)| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            if re.is_finite() && im.is_finite() {
                Ok(Complex64::new(re, im))
            } else {
                Err(err(KSPACE_HEADER_LEN + 16 * k, "non-finite sample".into()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    KSpaceData::new(mask.clone(), samples)
}
