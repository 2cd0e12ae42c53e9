//! Overlap measures on binary masks and the mean absolute contour distance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::structure::Structure;

/// Boundary pixels of a mask as `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<(usize, usize)>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-case, per-structure evaluation result. `macd_mm` is `None` when either
/// mask is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub case_id: String,
    pub structure: Structure,
    pub dice: f64,
    pub jaccard: f64,
    pub macd_mm: Option<f64>,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "case_id,structure,dice,jaccard,macd_mm";

    pub fn csv_row(&self) -> String {
        let macd = self.macd_mm.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{:.6},{:.6},{}",
            self.case_id, self.structure, self.dice, self.jaccard, macd
        )
    }
}

/// Serialize records as CSV with a header line.
pub fn records_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", MetricsRecord::CSV_HEADER).unwrap();
    for r in records {
        writeln!(out, "{}", r.csv_row()).unwrap();
    }
    out
}

/// Parse CSV written by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Config(format!("metrics line {}: expected 5 fields", i + 1)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("metrics line {}: {e}", i + 1)))
        };
        out.push(MetricsRecord {
            case_id: f[0].to_string(),
            structure: f[1].parse()?,
            dice: num(f[2])?,
            jaccard: num(f[3])?,
            macd_mm: if f[4].is_empty() { None } else { Some(num(f[4])?) },
        });
    }
    Ok(out)
}

struct Overlap {
    a: usize,
    b: usize,
    both: usize,
}

fn overlap(a: &Mask, b: &Mask) -> Result<Overlap> {
    if a.shape() != b.shape() {
        return Err(Error::Contract(format!("mask shapes {:?} vs {:?}", a.shape(), b.shape())));
    }
    let mut o = Overlap { a: 0, b: 0, both: 0 };
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        o.a += x as usize;
        o.b += y as usize;
        o.both += (x && y) as usize;
    }
    if o.a + o.b == 0 {
        return Err(Error::UndefinedMeasure("both masks are empty".into()));
    }
    Ok(o)
}

/// `2|A∩B| / (|A| + |B|)`
pub fn dice_coeff(a: &Mask, b: &Mask) -> Result<f64> {
    let o = overlap(a, b)?;
    Ok(2.0 * o.both as f64 / (o.a + o.b) as f64)
}

/// `|A∩B| / |A∪B|`
pub fn jaccard_index(a: &Mask, b: &Mask) -> Result<f64> {
    let o = overlap(a, b)?;
    Ok(o.both as f64 / (o.a + o.b - o.both) as f64)
}

/// Foreground pixels with at least one 4-neighbour in the background; pixels
/// outside the image count as background.
pub fn extract_contour(mask: &Mask) -> Result<Contour> {
    let (h, w) = mask.shape();
    let mut points = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !*mask.get(r, c) {
                continue;
            }
            let boundary = r == 0
                || c == 0
                || r + 1 == h
                || c + 1 == w
                || !*mask.get(r - 1, c)
                || !*mask.get(r + 1, c)
                || !*mask.get(r, c - 1)
                || !*mask.get(r, c + 1);
            if boundary {
                points.push((r, c));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyStructure("mask has no foreground".into()));
    }
    Ok(Contour { points })
}

/// Mean over `from` of the Euclidean distance to the nearest point of `to`,
/// in pixels. Exact: minima are taken over integer squared distances.
fn mean_nearest(from: &Contour, to: &Contour) -> f64 {
    let total: f64 = from
        .points
        .iter()
        .map(|&(ar, ac)| {
            let best = to
                .points
                .iter()
                .map(|&(br, bc)| {
                    let dr = ar as i64 - br as i64;
                    let dc = ac as i64 - bc as i64;
                    dr * dr + dc * dc
                })
                .min()
                .expect("nonempty contour");
            (best as f64).sqrt()
        })
        .sum();
    total / from.len() as f64
}

/// Symmetric mean absolute contour distance in millimeters.
pub fn macd(a: &Mask, b: &Mask, mm_per_pixel: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Contract(format!("mask shapes {:?} vs {:?}", a.shape(), b.shape())));
    }
    let ca = extract_contour(a).map_err(|_| Error::UndefinedMeasure("first mask is empty".into()))?;
    let cb = extract_contour(b).map_err(|_| Error::UndefinedMeasure("second mask is empty".into()))?;
    let ab = mean_nearest(&ca, &cb);
    let ba = mean_nearest(&cb, &ca);
    Ok(mm_per_pixel * 0.5 * (ab + ba))
}

/// Physical size of a working-resolution pixel.
///
/// The spacing is quantized to whole nanometres so the result is a single
/// correctly rounded division of integers (0.175 mm at 2048 -> 224 gives
/// exactly 1.6).
pub fn mm_scale(native_spacing_mm: f64, native_size: usize, working_size: usize) -> f64 {
    let nm = (native_spacing_mm * 1e6).round();
    (nm * native_size as f64) / (working_size as f64 * 1e6)
}

/// Dice, Jaccard and MACD of `pred` against `truth`.
///
/// Both empty counts as a perfect match; an empty prediction against nonempty
/// truth (or vice versa) gives zero overlap and an undefined MACD.
pub fn score_pair(
    case_id: &str,
    structure: Structure,
    pred: &Mask,
    truth: &Mask,
    mm_per_pixel: f64,
) -> Result<MetricsRecord> {
    if pred.shape() != truth.shape() {
        return Err(Error::Contract(format!(
            "{case_id}/{structure}: prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let (dice, jaccard) = match (dice_coeff(pred, truth), jaccard_index(pred, truth)) {
        (Ok(d), Ok(j)) => (d, j),
        _ => (1.0, 1.0),
    };
    let macd_mm = match macd(pred, truth, mm_per_pixel) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMeasure(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsRecord {
        case_id: case_id.to_string(),
        structure,
        dice,
        jaccard,
        macd_mm,
    })
}
