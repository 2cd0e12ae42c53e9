//! Segmentation networks mapping `(batch, 3, H, W)` radiographs to
//! `(batch, classes, H, W)` per-class probabilities.
//!
//! All four architectures end in an independent sigmoid per class, so
//! overlapping structures (clavicles over lung fields) can both be
//! foreground at the same pixel.

mod densenet;
mod drn;
mod fcn;
mod layers;
mod params;
mod unet;
mod vgg;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

pub use params::ParamStore;
pub use vgg::{features_index, save_vgg16_archive, PretrainedWeights, VGG16_CONV_PARAMS, VGG16_STAGES};

use crate::dataset::ModelInput;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::losses::ClassSet;
use crate::structure::{ScoreMaps, Structure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchName {
    Fcn8s,
    UnetVgg16,
    FcDensenet,
    DrnC26,
}

impl ArchName {
    pub const ALL: [ArchName; 4] = [ArchName::Fcn8s, ArchName::UnetVgg16, ArchName::FcDensenet, ArchName::DrnC26];

    pub fn key(self) -> &'static str {
        match self {
            ArchName::Fcn8s => "fcn8s",
            ArchName::UnetVgg16 => "unet_vgg16",
            ArchName::FcDensenet => "fc_densenet",
            ArchName::DrnC26 => "drn_c26",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ArchName::Fcn8s => "FCN",
            ArchName::UnetVgg16 => "U-Net (VGG16)",
            ArchName::FcDensenet => "FC DenseNet",
            ArchName::DrnC26 => "DRN",
        }
    }

    /// Whether the architecture has a VGG-16 encoder that can be initialized
    /// from ImageNet weights.
    pub fn supports_pretrained(self) -> bool {
        matches!(self, ArchName::Fcn8s | ArchName::UnetVgg16)
    }
}

impl fmt::Display for ArchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ArchName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ArchName::ALL
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}`")))
    }
}

fn default_classes() -> usize {
    3
}

fn default_input_size() -> usize {
    crate::dataset::WORKING_SIZE
}

fn default_divisor() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub name: ArchName,
    #[serde(default)]
    pub pretrained_encoder: bool,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    /// Side of the square input; a multiple of 32.
    #[serde(default = "default_input_size")]
    pub input_size: usize,
    /// Divides every channel width; 1 gives the published networks, larger
    /// values give cheap variants for smoke tests.
    #[serde(default = "default_divisor")]
    pub width_divisor: usize,
}

impl ArchSpec {
    pub fn new(name: ArchName, pretrained_encoder: bool) -> Self {
        Self {
            name,
            pretrained_encoder,
            num_classes: default_classes(),
            input_size: default_input_size(),
            width_divisor: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pretrained_encoder && !self.name.supports_pretrained() {
            return Err(Error::Config(format!("{} has no pretrained encoder", self.name)));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be at least 1".into()));
        }
        if self.input_size == 0 || self.input_size % 32 != 0 {
            return Err(Error::Config(format!(
                "input_size {} is not a positive multiple of 32",
                self.input_size
            )));
        }
        if self.width_divisor == 0 {
            return Err(Error::Config("width_divisor must be at least 1".into()));
        }
        if self.pretrained_encoder && self.width_divisor != 1 {
            return Err(Error::Config("pretrained weights need width_divisor = 1".into()));
        }
        Ok(())
    }
}

enum Net {
    Fcn(fcn::Fcn8s),
    Unet(unet::UnetVgg16),
    Dense(densenet::FcDenseNet),
    Drn(drn::DrnC26),
}

/// Anything that turns a preprocessed image into per-class score maps.
pub trait Segmenter {
    fn classes(&self) -> &[Structure];
    fn predict(&self, input: &ModelInput) -> Result<ScoreMaps>;
}

/// A constructed network together with its parameters.
pub struct SegmentationModel {
    spec: ArchSpec,
    classes: ClassSet,
    store: ParamStore,
    net: Net,
}

impl SegmentationModel {
    /// Build `spec` with seeded initialization; `weights` is required when the
    /// spec asks for a pretrained encoder.
    pub fn new(spec: ArchSpec, classes: ClassSet, seed: u64, weights: Option<&PretrainedWeights>) -> Result<Self> {
        spec.validate()?;
        if classes.len() != spec.num_classes {
            return Err(Error::Config(format!(
                "{} classes requested but num_classes = {}",
                classes.len(),
                spec.num_classes
            )));
        }
        let mut store = ParamStore::new(seed, Device::Cpu);
        let k = spec.num_classes;
        let d = spec.width_divisor;
        let net = match spec.name {
            ArchName::Fcn8s => Net::Fcn(fcn::Fcn8s::new(&mut store, k, d)?),
            ArchName::UnetVgg16 => Net::Unet(unet::UnetVgg16::new(&mut store, k, d)?),
            ArchName::FcDensenet => Net::Dense(densenet::FcDenseNet::new(
                &mut store,
                k,
                d,
                densenet::DenseNetConfig::FC_DENSENET56,
            )?),
            ArchName::DrnC26 => Net::Drn(drn::DrnC26::new(&mut store, k, d)?),
        };
        let model = Self {
            spec,
            classes,
            store,
            net,
        };
        if model.spec.pretrained_encoder {
            let w = weights.ok_or_else(|| {
                Error::WeightLoad("pretrained encoder requested but no VGG-16 weight file configured".into())
            })?;
            model.load_pretrained(w)?;
        }
        Ok(model)
    }

    fn load_pretrained(&self, source: &PretrainedWeights) -> Result<()> {
        let tensors = source.load(self.store.device())?;
        match &self.net {
            Net::Unet(n) => n.load_pretrained(&self.store, &tensors),
            Net::Fcn(n) => n.load_pretrained(&self.store, &tensors),
            _ => Err(Error::Config(format!("{} has no pretrained encoder", self.spec.name))),
        }
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn class_set(&self) -> &ClassSet {
        &self.classes
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn device(&self) -> &Device {
        self.store.device()
    }

    /// Raw pre-sigmoid scores.
    pub fn logits(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4().map_err(|_| {
            Error::Contract(format!("expected a (batch, 3, H, W) input, got {:?}", x.dims()))
        })?;
        let s = self.spec.input_size;
        if c != ModelInput::CHANNELS || h != s || w != s {
            return Err(Error::Contract(format!(
                "expected (batch, 3, {s}, {s}) input, got {:?}",
                x.dims()
            )));
        }
        match &self.net {
            Net::Fcn(n) => n.forward_t(x, train),
            Net::Unet(n) => n.forward(x),
            Net::Dense(n) => n.forward_t(x, train),
            Net::Drn(n) => n.forward_t(x, train),
        }
    }

    /// Per-class probabilities in `[0, 1]`.
    pub fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        layers::sigmoid(&self.logits(x, train)?)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_t(x, false)
    }

    pub fn predict_batch(&self, inputs: &[&ModelInput]) -> Result<Vec<ScoreMaps>> {
        let x = inputs_to_tensor(inputs, self.device())?;
        let y = self.forward(&x)?;
        scores_from_tensor(&y, inputs, self.classes.classes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.store.varmap().save(path)?;
        Ok(())
    }

    /// Load parameters previously written by [`SegmentationModel::save`].
    pub fn load(&mut self, path: &Path) -> Result<()> {
        self.store
            .load_file(path)
            .map_err(|e| Error::WeightLoad(format!("{}: {e}", path.display())))
    }
}

impl Segmenter for SegmentationModel {
    fn classes(&self) -> &[Structure] {
        self.classes.classes()
    }

    fn predict(&self, input: &ModelInput) -> Result<ScoreMaps> {
        Ok(self.predict_batch(&[input])?.remove(0))
    }
}

/// Stack inputs into a `(batch, 3, H, W)` tensor.
pub fn inputs_to_tensor(inputs: &[&ModelInput], device: &Device) -> Result<Tensor> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    let (h, w) = first.shape();
    let mut data = Vec::with_capacity(inputs.len() * 3 * h * w);
    for x in inputs {
        if x.shape() != (h, w) {
            return Err(Error::Contract("batch inputs differ in size".into()));
        }
        data.extend(x.to_chw());
    }
    Ok(Tensor::from_vec(data, (inputs.len(), 3, h, w), device)?)
}

/// Split a `(batch, classes, H, W)` probability tensor into score maps.
pub fn scores_from_tensor(y: &Tensor, inputs: &[&ModelInput], classes: &[Structure]) -> Result<Vec<ScoreMaps>> {
    let (b, c, h, w) = y.dims4()?;
    if b != inputs.len() || c != classes.len() {
        return Err(Error::Contract(format!(
            "output {:?} does not match {} inputs x {} classes",
            y.dims(),
            inputs.len(),
            classes.len()
        )));
    }
    let flat: Vec<f32> = y.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    let plane = h * w;
    let mut out = Vec::with_capacity(b);
    for (i, x) in inputs.iter().enumerate() {
        let maps = (0..c)
            .map(|k| {
                let start = (i * c + k) * plane;
                Grid::from_vec(h, w, flat[start..start + plane].to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ScoreMaps::new(x.case_id.clone(), classes.to_vec(), maps)?);
    }
    Ok(out)
}
