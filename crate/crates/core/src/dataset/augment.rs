//! Random similarity transforms (scale, translation, rotation) applied jointly
//! to an input image and its masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MaskSet, ModelInput};
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};

pub const MAX_ROTATION_DEG: f64 = 15.0;

/// Sampling ranges for augmentation.
///
/// `scale_range` is a fractional change (`(-0.1, 0.1)` means a zoom factor in
/// `[0.9, 1.1]`), `translate_range` is a fraction of the image side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentParams {
    pub scale_range: (f64, f64),
    pub translate_range: (f64, f64),
    pub rotate_range_deg: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            scale_range: (-0.1, 0.1),
            translate_range: (-0.1, 0.1),
            rotate_range_deg: (-10.0, 10.0),
            seed: 0,
        }
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            scale_range: (0.0, 0.0),
            translate_range: (0.0, 0.0),
            rotate_range_deg: (0.0, 0.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("scale_range", self.scale_range),
            ("translate_range", self.translate_range),
            ("rotate_range_deg", self.rotate_range_deg),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!("{name} ({lo}, {hi}) is not an interval")));
            }
            if (lo + hi).abs() > 1e-12 {
                return Err(Error::Config(format!("{name} ({lo}, {hi}) is not symmetric about 0")));
            }
        }
        if self.rotate_range_deg.1 > MAX_ROTATION_DEG {
            return Err(Error::Config(format!(
                "rotation {}° exceeds {MAX_ROTATION_DEG}°",
                self.rotate_range_deg.1
            )));
        }
        if self.scale_range.0 <= -1.0 {
            return Err(Error::Config("scale range reaches zero zoom".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Draw a transform from the ranges using `self.seed`.
    pub fn sample(&self, side: usize) -> AugmentTransform {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let scale = 1.0 + draw(self.scale_range);
        let shift_x = draw(self.translate_range) * side as f64;
        let shift_y = draw(self.translate_range) * side as f64;
        let angle_deg = draw(self.rotate_range_deg);
        AugmentTransform {
            scale,
            shift_x,
            shift_y,
            angle_deg,
        }
    }
}

/// A similarity transform about the image center; shifts are in pixels,
/// `x` along columns and `y` along rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentTransform {
    pub scale: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub angle_deg: f64,
}

impl AugmentTransform {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        shift_x: 0.0,
        shift_y: 0.0,
        angle_deg: 0.0,
    };

    /// Source coordinate (x, y) sampled for destination pixel (col, row).
    fn source(&self, col: usize, row: usize, h: usize, w: usize) -> (f64, f64) {
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let dx = col as f64 - cx - self.shift_x;
        let dy = row as f64 - cy - self.shift_y;
        let (sin, cos) = self.angle_deg.to_radians().sin_cos();
        // inverse rotation, then inverse scale
        let sx = (cos * dx + sin * dy) / self.scale;
        let sy = (-sin * dx + cos * dy) / self.scale;
        (sx + cx, sy + cy)
    }

    pub fn warp_image(&self, src: &Grid<f32>) -> Grid<f32> {
        let (h, w) = src.shape();
        Grid::from_fn(h, w, |r, c| {
            let (x, y) = self.source(c, r, h, w);
            sample_bilinear(src, x, y)
        })
    }

    pub fn warp_mask(&self, src: &Mask) -> Mask {
        let (h, w) = src.shape();
        Grid::from_fn(h, w, |r, c| {
            let (x, y) = self.source(c, r, h, w);
            let (xr, yr) = (x.round(), y.round());
            if xr < 0.0 || yr < 0.0 || xr >= w as f64 || yr >= h as f64 {
                false
            } else {
                *src.get(yr as usize, xr as usize)
            }
        })
    }
}

/// Bilinear sample where out-of-frame taps contribute zero.
fn sample_bilinear(src: &Grid<f32>, x: f64, y: f64) -> f32 {
    let (h, w) = src.shape();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let tap = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= h as f64 || c >= w as f64 {
            0.0
        } else {
            *src.get(r as usize, c as usize) as f64
        }
    };
    let mut acc = 0.0;
    for (r, wr) in [(y0, 1.0 - fy), (y0 + 1.0, fy)] {
        if wr == 0.0 {
            continue;
        }
        for (c, wc) in [(x0, 1.0 - fx), (x0 + 1.0, fx)] {
            if wc != 0.0 {
                acc += wr * wc * tap(r, c);
            }
        }
    }
    acc as f32
}

/// Apply one transform, sampled from `p`, to the image (bilinear) and every
/// mask (nearest neighbour). Areas moved in from outside the frame become 0.
pub fn augment(x: &ModelInput, m: &MaskSet, p: &AugmentParams) -> Result<(ModelInput, MaskSet)> {
    if x.shape() != m.resolution() {
        return Err(Error::Contract(format!(
            "image {:?} and masks {:?} differ in size",
            x.shape(),
            m.resolution()
        )));
    }
    let t = p.sample(x.shape().1);
    apply_transform(x, m, &t)
}

pub(crate) fn apply_transform(
    x: &ModelInput,
    m: &MaskSet,
    t: &AugmentTransform,
) -> Result<(ModelInput, MaskSet)> {
    let plane = t.warp_image(x.plane());
    let masks = m.map_masks(|_, mask| t.warp_mask(mask))?;
    Ok((
        ModelInput::new(x.case_id.clone(), plane, x.norm_mean, x.norm_std),
        masks,
    ))
}
