//! Headerless JSRT raw files: 2048x2048 big-endian u16 words, row-major, with
//! 12 significant bits.

use std::path::Path;

use super::Radiograph;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const JSRT_SIDE: usize = 2048;
pub const JSRT_BYTES: usize = JSRT_SIDE * JSRT_SIDE * 2;
pub const JSRT_MAX_VALUE: u16 = 4095;
pub const JSRT_SPACING_MM: f64 = 0.175;

/// Decode a raw JSRT file.
///
/// The distributed files store gray levels inverted relative to the usual
/// display convention (bone dark), so callers normally pass `invert = true`,
/// which maps every value `v` to `4095 - v`.
pub fn parse_jsrt_image(case_id: impl Into<String>, raw: &[u8], invert: bool) -> Result<Radiograph> {
    if raw.len() != JSRT_BYTES {
        return Err(Error::MalformedFile {
            expected: JSRT_BYTES,
            actual: raw.len(),
        });
    }
    let mut pixels = Vec::with_capacity(JSRT_SIDE * JSRT_SIDE);
    for (index, word) in raw.chunks_exact(2).enumerate() {
        let value = u16::from_be_bytes([word[0], word[1]]);
        if value > JSRT_MAX_VALUE {
            return Err(Error::DepthViolation { value, index });
        }
        pixels.push(if invert { JSRT_MAX_VALUE - value } else { value });
    }
    let pixels = Grid::from_vec(JSRT_SIDE, JSRT_SIDE, pixels)?;
    Radiograph::new(case_id, pixels, JSRT_SPACING_MM)
}

/// Inverse of [`parse_jsrt_image`] with `invert = false`.
pub fn serialize_jsrt_image(image: &Radiograph) -> Vec<u8> {
    image
        .pixels
        .as_slice()
        .iter()
        .flat_map(|v| v.to_be_bytes())
        .collect()
}

/// Read a `.IMG` file; the case id is the file stem.
pub fn read_jsrt_file(path: &Path, invert: bool) -> Result<Radiograph> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let case_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_jsrt_image(case_id, &raw, invert)
}

/// Read a radiograph from either a raw JSRT file (extension `.img`, or
/// exactly [`JSRT_BYTES`] long) or an 8/16-bit grayscale raster. Raster gray
/// levels are rescaled to 12 bits; `spacing_mm` applies to rasters only.
pub fn read_radiograph(path: &Path, invert_raw: bool, spacing_mm: f64) -> Result<Radiograph> {
    let is_raw = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("img"))
        .unwrap_or(false)
        || std::fs::metadata(path).map(|m| m.len() == JSRT_BYTES as u64).unwrap_or(false);
    if is_raw {
        return read_jsrt_file(path, invert_raw);
    }
    let case_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let img = image::open(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let sixteen = matches!(
        img.color(),
        image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
    );
    let gray = img.to_luma16();
    let (w, h) = gray.dimensions();
    let data = gray
        .into_raw()
        .into_iter()
        .map(|v| if sixteen { v >> 4 } else { (v >> 8) << 4 | (v >> 12) })
        .collect();
    Radiograph::new(case_id, Grid::from_vec(h as usize, w as usize, data)?, spacing_mm)
}
