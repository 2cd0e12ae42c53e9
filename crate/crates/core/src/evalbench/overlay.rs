use image::{Rgb, RgbImage};

use crate::dataset::{resize_bilinear, MaskSet, Radiograph};
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::metrics::jaccard_index;
use crate::structure::Structure;

pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const GREEN: [u8; 3] = [0, 255, 0];

/// Weight of the overlay color against the radiograph.
const ALPHA: f32 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverlayClass {
    TruthOnly,
    PredOnly,
    Both,
}

impl OverlayClass {
    pub fn color(self) -> [u8; 3] {
        match self {
            OverlayClass::TruthOnly => BLUE,
            OverlayClass::PredOnly => RED,
            OverlayClass::Both => GREEN,
        }
    }
}

/// Per-pixel overlay class; `None` outside both masks.
pub fn overlay_classes(gt: &Mask, pred: &Mask) -> Result<Grid<Option<OverlayClass>>> {
    if gt.shape() != pred.shape() {
        return Err(Error::Contract(format!(
            "ground truth {:?} and prediction {:?} differ in resolution",
            gt.shape(),
            pred.shape()
        )));
    }
    Ok(Grid::from_fn(gt.height(), gt.width(), |r, c| {
        match (*gt.get(r, c), *pred.get(r, c)) {
            (true, true) => Some(OverlayClass::Both),
            (true, false) => Some(OverlayClass::TruthOnly),
            (false, true) => Some(OverlayClass::PredOnly),
            (false, false) => None,
        }
    }))
}

/// Number of header rows above an image of width `w`.
pub fn header_height(w: usize) -> usize {
    (GLYPH_H + 2) * glyph_scale(w)
}

fn glyph_scale(w: usize) -> usize {
    (w / 112).max(1)
}

/// The radiograph at mask resolution with ground truth in blue, prediction
/// in red and their overlap in green, under a header strip that reads
/// `<initial> J=<jaccard>`.
pub fn render_overlay(image: &Radiograph, gt: &MaskSet, pred: &MaskSet, structure: Structure) -> Result<RgbImage> {
    if gt.resolution() != pred.resolution() {
        return Err(Error::Contract(format!(
            "ground truth {:?} and prediction {:?} differ in resolution",
            gt.resolution(),
            pred.resolution()
        )));
    }
    let missing = |who: &str| Error::Contract(format!("{who} has no {structure} mask"));
    let g = gt.get(structure).ok_or_else(|| missing("ground truth"))?;
    let p = pred.get(structure).ok_or_else(|| missing("prediction"))?;
    let classes = overlay_classes(g, p)?;
    let (h, w) = g.shape();

    let base = resize_bilinear(&image.pixels.map(|&v| v as f32), h, w);
    let (lo, hi) = base
        .as_slice()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };

    let top = header_height(w);
    let mut out = RgbImage::new(w as u32, (h + top) as u32);
    for r in 0..h {
        for c in 0..w {
            let gray = (base.get(r, c) - lo) / span * 255.0;
            let px = match classes.get(r, c) {
                Some(k) => {
                    let col = k.color();
                    let mix = |i: usize| (ALPHA * col[i] as f32 + (1.0 - ALPHA) * gray).round() as u8;
                    [mix(0), mix(1), mix(2)]
                }
                None => {
                    let v = gray.round() as u8;
                    [v, v, v]
                }
            };
            out.put_pixel(c as u32, (r + top) as u32, Rgb(px));
        }
    }
    let j = jaccard_index(p, g).unwrap_or(1.0);
    let initial = &structure.title()[..1];
    draw_text(&mut out, &format!("{initial} J={j:.3}"), glyph_scale(w));
    Ok(out)
}

const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;

/// 3x5 bitmaps, one row per byte, most significant of the low three bits on
/// the left.
fn glyph(ch: char) -> [u8; GLYPH_H] {
    match ch {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '=' => [0b000, 0b111, 0b000, 0b111, 0b000],
        'J' => [0b001, 0b001, 0b001, 0b101, 0b111],
        'L' => [0b100, 0b100, 0b100, 0b100, 0b111],
        'H' => [0b101, 0b101, 0b111, 0b101, 0b101],
        'C' => [0b111, 0b100, 0b100, 0b100, 0b111],
        _ => [0; GLYPH_H],
    }
}

fn draw_text(img: &mut RgbImage, text: &str, scale: usize) {
    let (iw, ih) = (img.width() as usize, img.height() as usize);
    let mut x0 = scale;
    for ch in text.chars() {
        let rows = glyph(ch);
        for (gy, bits) in rows.iter().enumerate() {
            for gx in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - gx) & 1 == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let (x, y) = (x0 + gx * scale + dx, scale + gy * scale + dy);
                        if x < iw && y < ih {
                            img.put_pixel(x as u32, y as u32, Rgb([255, 255, 255]));
                        }
                    }
                }
            }
        }
        x0 += (GLYPH_W + 1) * scale;
    }
}

/// Render and save one overlay as PNG.
pub fn save_overlay(
    path: &std::path::Path,
    image: &Radiograph,
    gt: &MaskSet,
    pred: &MaskSet,
    structure: Structure,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    render_overlay(image, gt, pred, structure)?
        .save(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}
