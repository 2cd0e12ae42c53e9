//! Ground-truth mask ingestion.
//!
//! Masks are 8-bit grayscale rasters, one file per structure per case, laid out
//! as `<source>/<structure>/<case_id>.<ext>`. Besides the pooled `lungs`,
//! `heart` and `clavicles` directories, the per-side directories shipped with
//! the SCR distribution (`left lung` + `right lung`, `left clavicle` +
//! `right clavicle`) are accepted and merged.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::MaskSet;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::postproc::count_components;
use crate::structure::Structure;

const EXTENSIONS: [&str; 5] = ["png", "gif", "bmp", "pgm", "tif"];

/// Load all three structure masks of `case_id`, resampled by nearest neighbour
/// to `target` = (height, width).
pub fn load_masks(case_id: &str, source_dir: &Path, target: (usize, usize)) -> Result<MaskSet> {
    let mut masks = BTreeMap::new();
    for structure in Structure::ALL {
        let files = structure_files(case_id, source_dir, structure).ok_or_else(|| {
            Error::IncompleteGroundTruth {
                case_id: case_id.to_string(),
                structure: structure.to_string(),
            }
        })?;
        let mut native: Option<Mask> = None;
        for file in &files {
            let part = read_mask_raster(file)?;
            native = Some(match native {
                None => part,
                Some(acc) => union(&acc, &part, file)?,
            });
        }
        let native = native.expect("at least one file");
        if structure == Structure::Lungs {
            let n = count_components(&native);
            if n != 2 {
                log::warn!("case {case_id}: lungs mask has {n} connected components, expected 2");
            }
        }
        masks.insert(structure, resample_nearest(&native, target.0, target.1));
    }
    MaskSet::new(case_id, masks)
}

fn structure_files(case_id: &str, dir: &Path, structure: Structure) -> Option<Vec<PathBuf>> {
    let find = |sub: &str| {
        EXTENSIONS
            .iter()
            .map(|ext| dir.join(sub).join(format!("{case_id}.{ext}")))
            .find(|p| p.is_file())
    };
    if let Some(p) = find(structure.name()) {
        return Some(vec![p]);
    }
    let sides: &[&str] = match structure {
        Structure::Lungs => &["left lung", "right lung"],
        Structure::Clavicles => &["left clavicle", "right clavicle"],
        Structure::Heart => &[],
    };
    if sides.is_empty() {
        return None;
    }
    sides.iter().map(|s| find(s)).collect()
}

fn union(a: &Mask, b: &Mask, path: &Path) -> Result<Mask> {
    if a.shape() != b.shape() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("resolution {:?} differs from sibling mask {:?}", b.shape(), a.shape()),
        });
    }
    Ok(Grid::from_fn(a.height(), a.width(), |r, c| *a.get(r, c) || *b.get(r, c)))
}

/// Decode one binary raster. Foreground is any gray level above 127; rasters
/// with more than two distinct gray levels are rejected.
pub fn read_mask_raster(path: &Path) -> Result<Mask> {
    let img = image::open(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .to_luma8();
    let mut seen = [false; 256];
    for p in img.pixels() {
        seen[p.0[0] as usize] = true;
    }
    let levels = seen.iter().filter(|&&s| s).count();
    if levels > 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("raster is not binary ({levels} distinct gray levels)"),
        });
    }
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v > 127).collect();
    Grid::from_vec(h as usize, w as usize, data)
}

/// Nearest-neighbour resampling with pixel-center alignment.
pub fn resample_nearest<T: Copy>(src: &Grid<T>, height: usize, width: usize) -> Grid<T> {
    let (sh, sw) = src.shape();
    let map = |i: usize, dst: usize, src_len: usize| -> usize {
        (((i as f64 + 0.5) * src_len as f64 / dst as f64).floor() as usize).min(src_len - 1)
    };
    let rows: Vec<usize> = (0..height).map(|r| map(r, height, sh)).collect();
    let cols: Vec<usize> = (0..width).map(|c| map(c, width, sw)).collect();
    Grid::from_fn(height, width, |r, c| *src.get(rows[r], cols[c]))
}

/// Rasterize closed polygons with the even-odd rule, sampling at pixel
/// centers. Vertices are `(x, y)` = (column, row) in pixel units.
///
/// This is the conversion path for ground truth distributed as landmark point
/// lists rather than rasters.
pub fn rasterize_polygons(height: usize, width: usize, polygons: &[Vec<(f64, f64)>]) -> Mask {
    let mut mask = Grid::filled(height, width, false);
    for r in 0..height {
        let y = r as f64 + 0.5;
        let mut crossings: Vec<f64> = Vec::new();
        for poly in polygons {
            let n = poly.len();
            for i in 0..n {
                let (x0, y0) = poly[i];
                let (x1, y1) = poly[(i + 1) % n];
                if (y0 <= y) != (y1 <= y) {
                    crossings.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
                }
            }
        }
        crossings.sort_by(|a, b| a.total_cmp(b));
        for pair in crossings.chunks_exact(2) {
            for c in 0..width {
                let x = c as f64 + 0.5;
                if x >= pair[0] && x < pair[1] {
                    mask.set(r, c, true);
                }
            }
        }
    }
    mask
}
