//! PNG and binary-PPM (P6) decode/encode for images and masks.
//!
//! Label masks are stored as single-channel PNGs with raw values {0, 1, 2};
//! the loader also accepts the {0, 128, 255} convention used by ground-truth
//! exports and remaps it with thresholds at 64 and 192.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{BinaryMask, GrayImage, ImagingError, LabelMask, RgbImage};

/// Decodes a PNG or binary PPM image, sniffing the format from the header.
pub fn load_image(path: &Path) -> Result<RgbImage, ImagingError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"\x89PNG") {
        let (w, h, gray, data) = decode_png_bytes(&bytes, path)?;
        let rgb = if gray {
            data.iter().flat_map(|&v| [v, v, v]).collect()
        } else {
            data
        };
        RgbImage::new(w, h, rgb)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(&bytes, path)
    } else {
        Err(ImagingError::UnsupportedFormat(format!(
            "{}: not a PNG or binary PPM file",
            path.display()
        )))
    }
}

pub fn save_image_ppm(img: &RgbImage, path: &Path) -> Result<(), ImagingError> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P6\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(img.data())?;
    out.flush()?;
    Ok(())
}

pub fn save_image_png(img: &RgbImage, path: &Path) -> Result<(), ImagingError> {
    encode_png(
        path,
        img.width(),
        img.height(),
        png::ColorType::Rgb,
        img.data(),
    )
}

pub fn save_gray_png(img: &GrayImage, path: &Path) -> Result<(), ImagingError> {
    encode_png(
        path,
        img.width(),
        img.height(),
        png::ColorType::Grayscale,
        img.data(),
    )
}

pub fn load_gray_png(path: &Path) -> Result<GrayImage, ImagingError> {
    let (w, h, data) = decode_gray(path)?;
    GrayImage::new(w, h, data)
}

/// Loads a binary mask from a grayscale PNG; any nonzero pixel reads as true.
pub fn load_binary_mask(path: &Path) -> Result<BinaryMask, ImagingError> {
    let (w, h, data) = decode_gray(path)?;
    BinaryMask::new(w, h, data.iter().map(|&v| v != 0).collect())
}

/// Stores a binary mask as a 0/255 grayscale PNG.
pub fn save_binary_mask(mask: &BinaryMask, path: &Path) -> Result<(), ImagingError> {
    let data: Vec<u8> = mask
        .data()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    encode_png(
        path,
        mask.width(),
        mask.height(),
        png::ColorType::Grayscale,
        &data,
    )
}

/// Loads a three-class label mask.
///
/// Files whose values are all in {0, 1, 2} are taken verbatim; anything else
/// is remapped by thresholds: v < 64 → 0, v < 192 → 1, otherwise 2.
pub fn load_label_mask(path: &Path) -> Result<LabelMask, ImagingError> {
    let (w, h, data) = decode_gray(path)?;
    let labels = if data.iter().all(|&v| v <= 2) {
        data
    } else {
        data.iter()
            .map(|&v| {
                if v < 64 {
                    0
                } else if v < 192 {
                    1
                } else {
                    2
                }
            })
            .collect()
    };
    LabelMask::new(w, h, labels)
}

/// Stores a label mask with raw pixel values {0, 1, 2}.
pub fn save_label_mask(mask: &LabelMask, path: &Path) -> Result<(), ImagingError> {
    encode_png(
        path,
        mask.width(),
        mask.height(),
        png::ColorType::Grayscale,
        mask.labels(),
    )
}

fn decode_gray(path: &Path) -> Result<(usize, usize, Vec<u8>), ImagingError> {
    let bytes = std::fs::read(path)?;
    if !bytes.starts_with(b"\x89PNG") {
        return Err(ImagingError::UnsupportedFormat(format!(
            "{}: masks must be PNG",
            path.display()
        )));
    }
    let (w, h, gray, data) = decode_png_bytes(&bytes, path)?;
    if gray {
        return Ok((w, h, data));
    }
    // Accept RGB exports of single-channel data as long as the channels agree.
    if data
        .chunks_exact(3)
        .all(|px| px[0] == px[1] && px[1] == px[2])
    {
        Ok((w, h, data.iter().step_by(3).copied().collect()))
    } else {
        Err(ImagingError::UnsupportedFormat(format!(
            "{}: expected single-channel mask data",
            path.display()
        )))
    }
}

/// Returns (width, height, is_grayscale, pixel bytes) with 8-bit depth.
fn decode_png_bytes(
    bytes: &[u8],
    path: &Path,
) -> Result<(usize, usize, bool, Vec<u8>), ImagingError> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| png_error(e, path))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| png_error(e, path))?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    match info.color_type {
        png::ColorType::Grayscale => Ok((w, h, true, buf)),
        png::ColorType::GrayscaleAlpha => {
            Ok((w, h, true, buf.chunks_exact(2).map(|px| px[0]).collect()))
        }
        png::ColorType::Rgb => Ok((w, h, false, buf)),
        png::ColorType::Rgba => Ok((
            w,
            h,
            false,
            buf.chunks_exact(4)
                .flat_map(|px| [px[0], px[1], px[2]])
                .collect(),
        )),
        other => Err(ImagingError::UnsupportedFormat(format!(
            "{}: png color type {other:?}",
            path.display()
        ))),
    }
}

fn png_error(err: png::DecodingError, path: &Path) -> ImagingError {
    match err {
        png::DecodingError::IoError(e) => ImagingError::Io(e),
        other => ImagingError::Truncated(format!("{}: {other}", path.display())),
    }
}

fn encode_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    data: &[u8],
) -> Result<(), ImagingError> {
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| ImagingError::UnsupportedFormat(format!("png encode: {e}")))?;
    writer
        .write_image_data(data)
        .map_err(|e| ImagingError::UnsupportedFormat(format!("png encode: {e}")))?;
    Ok(())
}

fn decode_ppm(bytes: &[u8], path: &Path) -> Result<RgbImage, ImagingError> {
    let mut cursor = 2usize; // past "P6"
    let width = read_ppm_number(bytes, &mut cursor, path)?;
    let height = read_ppm_number(bytes, &mut cursor, path)?;
    let maxval = read_ppm_number(bytes, &mut cursor, path)?;
    if maxval != 255 {
        return Err(ImagingError::UnsupportedFormat(format!(
            "{}: ppm maxval {maxval}, only 255 supported",
            path.display()
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    cursor += 1;
    let need = width * height * 3;
    let raster = bytes
        .get(cursor..cursor + need)
        .ok_or_else(|| ImagingError::Truncated(format!("{}: ppm raster short", path.display())))?;
    RgbImage::new(width, height, raster.to_vec())
}

fn read_ppm_number(bytes: &[u8], cursor: &mut usize, path: &Path) -> Result<usize, ImagingError> {
    // skip whitespace and '#' comments
    loop {
        match bytes.get(*cursor) {
            Some(b) if b.is_ascii_whitespace() => *cursor += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*cursor) {
                    *cursor += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => {
                return Err(ImagingError::Truncated(format!(
                    "{}: ppm header ended early",
                    path.display()
                )))
            }
        }
    }
    let start = *cursor;
    while bytes.get(*cursor).is_some_and(|b| b.is_ascii_digit()) {
        *cursor += 1;
    }
    if start == *cursor {
        return Err(ImagingError::UnsupportedFormat(format!(
            "{}: malformed ppm header",
            path.display()
        )));
    }
    let text = std::str::from_utf8(&bytes[start..*cursor]).expect("digits are utf8");
    text.parse().map_err(|_| {
        ImagingError::UnsupportedFormat(format!("{}: ppm number overflow", path.display()))
    })
}
