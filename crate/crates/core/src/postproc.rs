//! From score maps to clean binary masks: fixed threshold, small-object
//! removal (8-connected foreground) and hole filling (4-connected background).

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::MaskSet;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::structure::ScoreMaps;

pub const DEFAULT_THRESHOLD: f32 = 0.25;
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocParams {
    pub threshold: f32,
    /// Components smaller than this fraction of the frame are removed.
    pub min_area_fraction: f64,
    pub hole_fill: bool,
}

impl Default for PostprocParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            min_area_fraction: DEFAULT_MIN_AREA_FRACTION,
            hole_fill: true,
        }
    }
}

impl PostprocParams {
    /// Thresholding only, no cleanup.
    pub fn threshold_only() -> Self {
        Self {
            min_area_fraction: 0.0,
            hole_fill: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(0.0..0.5).contains(&self.min_area_fraction) {
            return Err(Error::Config(format!(
                "min_area_fraction {} outside [0, 0.5)",
                self.min_area_fraction
            )));
        }
        Ok(())
    }

    pub fn min_area(&self, height: usize, width: usize) -> usize {
        (self.min_area_fraction * (height * width) as f64).floor() as usize
    }
}

/// Per-class `score >= threshold`.
pub fn binarize(scores: &ScoreMaps, threshold: f32) -> Result<MaskSet> {
    let masks: BTreeMap<_, _> = scores
        .iter()
        .map(|(s, g)| (s, g.map(|&v| v >= threshold)))
        .collect();
    MaskSet::partial(scores.case_id.clone(), masks)
}

const N8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
const N4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

/// Label the connected components of pixels equal to `value`. Labels start at
/// 1; 0 marks pixels of the other value.
fn label(mask: &Mask, value: bool, neighbours: &[(isize, isize)]) -> (Grid<u32>, Vec<usize>) {
    let (h, w) = mask.shape();
    let mut labels = Grid::filled(h, w, 0u32);
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if *mask.get(r, c) != value || *labels.get(r, c) != 0 {
                continue;
            }
            let id = sizes.len() as u32 + 1;
            let mut size = 0;
            labels.set(r, c, id);
            queue.push_back((r, c));
            while let Some((pr, pc)) = queue.pop_front() {
                size += 1;
                for &(dr, dc) in neighbours {
                    let nr = pr as isize + dr;
                    let nc = pc as isize + dc;
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if *mask.get(nr, nc) == value && *labels.get(nr, nc) == 0 {
                        labels.set(nr, nc, id);
                        queue.push_back((nr, nc));
                    }
                }
            }
            sizes.push(size);
        }
    }
    (labels, sizes)
}

/// Number of 8-connected foreground components.
pub fn count_components(mask: &Mask) -> usize {
    label(mask, true, &N8).1.len()
}

/// Delete every 8-connected component with fewer than `min_area` pixels.
pub fn remove_small_objects(mask: &Mask, min_area: usize) -> Mask {
    if min_area == 0 {
        return mask.clone();
    }
    let (labels, sizes) = label(mask, true, &N8);
    labels.map(|&l| l != 0 && sizes[l as usize - 1] >= min_area)
}

/// Turn background regions that are not 4-connected to the image border into
/// foreground.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (h, w) = mask.shape();
    let (labels, sizes) = label(mask, false, &N4);
    let mut touches_border = vec![false; sizes.len()];
    for r in 0..h {
        for c in 0..w {
            if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
                let l = *labels.get(r, c);
                if l != 0 {
                    touches_border[l as usize - 1] = true;
                }
            }
        }
    }
    Grid::from_fn(h, w, |r, c| {
        let l = *labels.get(r, c);
        l == 0 || !touches_border[l as usize - 1]
    })
}

/// Binarize, remove small objects, fill holes, independently per class.
pub fn apply(scores: &ScoreMaps, p: &PostprocParams) -> Result<MaskSet> {
    let binary = binarize(scores, p.threshold)?;
    let (h, w) = binary.resolution();
    let min_area = p.min_area(h, w);
    binary.map_masks(|_, m| {
        let cleaned = remove_small_objects(m, min_area);
        if p.hole_fill {
            fill_holes(&cleaned)
        } else {
            cleaned
        }
    })
}

/// Write each mask as a 0/255 PNG at `<dir>/<structure>/<case_id>.png`, the
/// layout [`crate::dataset::load_masks`] reads.
pub fn write_masks(set: &MaskSet, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (s, m) in set.iter() {
        let sub = dir.join(s.name());
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let (h, w) = m.shape();
        let img = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
            image::Luma([if *m.get(y as usize, x as usize) { 255 } else { 0 }])
        });
        let path = sub.join(format!("{}.png", set.case_id));
        img.save(&path).map_err(|e| Error::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Structure;
    use proptest::prelude::*;

    fn parse(rows: &[&str]) -> Mask {
        let h = rows.len();
        let w = rows[0].len();
        Grid::from_fn(h, w, |r, c| rows[r].as_bytes()[c] == b'#')
    }

    fn scores_of(m: &Mask) -> ScoreMaps {
        ScoreMaps::new("x", vec![Structure::Heart], vec![m.to_f32()]).unwrap()
    }

    #[test]
    fn binarize_inclusive_threshold() {
        let g = Grid::from_vec(1, 4, vec![0.0, 0.2, 0.25, 0.3]).unwrap();
        let s = ScoreMaps::new("b", vec![Structure::Lungs], vec![g]).unwrap();
        let m = binarize(&s, 0.25).unwrap();
        assert_eq!(m.get(Structure::Lungs).unwrap().as_slice(), &[false, false, true, true]);
        let zero = ScoreMaps::new("z", vec![Structure::Lungs], vec![Grid::filled(3, 3, 0.0)]).unwrap();
        assert!(binarize(&zero, 0.25).unwrap().get(Structure::Lungs).unwrap().is_blank());
    }

    #[test]
    fn small_component_removed() {
        // a 3-pixel speck and a 500-pixel block
        let m = Grid::from_fn(40, 40, |r, c| (r < 3 && c == 0) || (r >= 10 && r < 30 && c >= 10 && c < 35));
        assert_eq!(count_components(&m), 2);
        let out = remove_small_objects(&m, 10);
        assert_eq!(out.count(), 500);
        assert!(!*out.get(0, 0));
        assert_eq!(remove_small_objects(&out, 10), out);
        let empty = Grid::filled(5, 5, false);
        assert_eq!(remove_small_objects(&empty, 3), empty);
    }

    #[test]
    fn diagonal_pixels_form_one_object() {
        let m = parse(&["#..", ".#.", "..#"]);
        assert_eq!(count_components(&m), 1);
        assert_eq!(remove_small_objects(&m, 3).count(), 3);
    }

    #[test]
    fn ring_becomes_disk() {
        let ring = parse(&[
            ".......", ".#####.", ".#...#.", ".#...#.", ".#...#.", ".#####.", ".......",
        ]);
        let disk = parse(&[
            ".......", ".#####.", ".#####.", ".#####.", ".#####.", ".#####.", ".......",
        ]);
        assert_eq!(fill_holes(&ring), disk);
    }

    #[test]
    fn border_touching_background_is_kept() {
        let m = parse(&["#.#", "#.#", "#.#"]);
        assert_eq!(fill_holes(&m), m);
        let empty = Grid::filled(4, 4, false);
        assert_eq!(fill_holes(&empty), empty);
    }

    #[test]
    fn diagonal_gap_is_still_a_hole() {
        // the center background pixel touches the outside only diagonally
        let m = parse(&[".....", ".###.", ".#.#.", ".###.", "....."]);
        assert!(*fill_holes(&m).get(2, 2));
        let open = parse(&[".....", ".#.#.", ".#.#.", ".###.", "....."]);
        assert!(!*fill_holes(&open).get(2, 2));
    }

    #[test]
    fn speckle_and_hole_fixture() {
        // 40x40 frame, min area = floor(0.005*1600) = 8
        let truth = Grid::from_fn(40, 40, |r, c| (8..32).contains(&r) && (8..32).contains(&c));
        let mut noisy = truth.clone();
        noisy.set(2, 2, true);
        noisy.set(2, 3, true);
        noisy.set(20, 20, false);
        noisy.set(20, 21, false);
        let out = apply(&scores_of(&noisy), &PostprocParams::default()).unwrap();
        assert_eq!(out.get(Structure::Heart).unwrap(), &truth);
        assert_eq!(apply(&scores_of(&truth), &PostprocParams::default()).unwrap().get(Structure::Heart).unwrap(), &truth);
    }

    proptest! {
        #[test]
        fn apply_is_idempotent(v in proptest::collection::vec(0.0f32..1.0, 30 * 30)) {
            let s = ScoreMaps::new("p", vec![Structure::Heart], vec![Grid::from_vec(30, 30, v).unwrap()]).unwrap();
            let p = PostprocParams::default();
            let once = apply(&s, &p).unwrap();
            let again = apply(&scores_of(once.get(Structure::Heart).unwrap()), &p).unwrap();
            prop_assert_eq!(once.get(Structure::Heart), again.get(Structure::Heart));
        }

        #[test]
        fn removal_shrinks_and_filling_grows(v in proptest::collection::vec(any::<bool>(), 20 * 20), k in 0usize..12) {
            let m = Grid::from_vec(20, 20, v).unwrap();
            let removed = remove_small_objects(&m, k);
            let filled = fill_holes(&m);
            for i in 0..m.len() {
                prop_assert!(!removed.as_slice()[i] || m.as_slice()[i]);
                prop_assert!(!m.as_slice()[i] || filled.as_slice()[i]);
            }
        }
    }

    #[test]
    fn written_masks_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let set = binarize(&scores_of(&parse(&["..#", ".##", "..."])), DEFAULT_THRESHOLD).unwrap();
        let paths = write_masks(&set, dir.path()).unwrap();
        assert_eq!(paths, vec![dir.path().join("heart").join(format!("{}.png", set.case_id))]);
        let back = crate::dataset::read_mask_raster(&paths[0]).unwrap();
        assert_eq!(&back, set.get(Structure::Heart).unwrap());
    }
}
