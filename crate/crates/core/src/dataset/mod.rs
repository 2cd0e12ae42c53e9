//! Radiograph and ground-truth ingestion, the benchmark split, preprocessing
//! and augmentation.

mod augment;
mod corpus;
mod folds;
mod jsrt;
mod masks;
mod preprocess;

use std::collections::BTreeMap;

pub use augment::{augment, AugmentParams, AugmentTransform};
pub use corpus::Corpus;
pub use folds::{make_fold_split, parse_manifest, FoldSplit, SplitPolicy, FOLD1_SIZE, FOLD2_SIZE};
pub use jsrt::{
    parse_jsrt_image, read_jsrt_file, read_radiograph, serialize_jsrt_image, JSRT_BYTES, JSRT_MAX_VALUE, JSRT_SIDE,
    JSRT_SPACING_MM,
};
pub use masks::{load_masks, rasterize_polygons, read_mask_raster, resample_nearest};
pub use preprocess::{normalize, preprocess, preprocess_to, resize_bilinear, WORKING_SIZE};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::structure::Structure;

/// One chest radiograph at native resolution.
#[derive(Clone, Debug)]
pub struct Radiograph {
    pub case_id: String,
    pub pixels: Grid<u16>,
    pub spacing_mm: f64,
}

impl Radiograph {
    pub fn new(case_id: impl Into<String>, pixels: Grid<u16>, spacing_mm: f64) -> Result<Self> {
        if !(spacing_mm > 0.0) {
            return Err(Error::Contract(format!("pixel spacing must be positive, got {spacing_mm}")));
        }
        if let Some((index, &value)) = pixels
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, &v)| v > JSRT_MAX_VALUE)
        {
            return Err(Error::DepthViolation { value, index });
        }
        Ok(Self {
            case_id: case_id.into(),
            pixels,
            spacing_mm,
        })
    }
}

/// Ground-truth masks of all three structures at a common resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    pub case_id: String,
    resolution: (usize, usize),
    masks: BTreeMap<Structure, Mask>,
}

impl MaskSet {
    /// Build a mask set; `masks` must hold every structure at one resolution.
    pub fn new(case_id: impl Into<String>, masks: BTreeMap<Structure, Mask>) -> Result<Self> {
        let case_id = case_id.into();
        for s in Structure::ALL {
            if !masks.contains_key(&s) {
                return Err(Error::IncompleteGroundTruth {
                    case_id,
                    structure: s.to_string(),
                });
            }
        }
        Self::partial(case_id, masks)
    }

    /// A mask set covering only some structures (predictions of single-class
    /// models).
    pub fn partial(case_id: impl Into<String>, masks: BTreeMap<Structure, Mask>) -> Result<Self> {
        let first = masks
            .values()
            .next()
            .ok_or_else(|| Error::Contract("mask set without masks".into()))?;
        let resolution = first.shape();
        if masks.values().any(|m| m.shape() != resolution) {
            return Err(Error::Contract("masks differ in resolution".into()));
        }
        Ok(Self {
            case_id: case_id.into(),
            resolution,
            masks,
        })
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.resolution
    }

    pub fn get(&self, s: Structure) -> Option<&Mask> {
        self.masks.get(&s)
    }

    pub fn structures(&self) -> impl Iterator<Item = Structure> + '_ {
        self.masks.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Structure, &Mask)> {
        self.masks.iter().map(|(s, m)| (*s, m))
    }

    pub fn map_masks(&self, mut f: impl FnMut(Structure, &Mask) -> Mask) -> Result<Self> {
        let masks = self.masks.iter().map(|(&s, m)| (s, f(s, m))).collect();
        Self::partial(self.case_id.clone(), masks)
    }
}

/// A preprocessed network input: one normalized grid replicated over three
/// channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub case_id: String,
    plane: Grid<f32>,
    pub norm_mean: f64,
    pub norm_std: f64,
}

impl ModelInput {
    pub const CHANNELS: usize = 3;

    pub fn new(case_id: impl Into<String>, plane: Grid<f32>, norm_mean: f64, norm_std: f64) -> Self {
        Self {
            case_id: case_id.into(),
            plane,
            norm_mean,
            norm_std,
        }
    }

    /// The normalized grid shared by all channels.
    pub fn plane(&self) -> &Grid<f32> {
        &self.plane
    }

    pub fn shape(&self) -> (usize, usize) {
        self.plane.shape()
    }

    /// The three (identical) input channels.
    pub fn channels(&self) -> [&Grid<f32>; 3] {
        [&self.plane, &self.plane, &self.plane]
    }

    /// Channel-major `3 x H x W` buffer.
    pub fn to_chw(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(3 * self.plane.len());
        for _ in 0..Self::CHANNELS {
            out.extend_from_slice(self.plane.as_slice());
        }
        out
    }
}

/// A preprocessed case ready for training or evaluation.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub case_id: String,
    pub input: ModelInput,
    pub masks: MaskSet,
}
