//! VGG-16 convolutional stack and ImageNet weight loading.
//!
//! Pretrained weights are read from a safetensors archive that uses the
//! torchvision layer names: `features.{i}.weight` / `features.{i}.bias` for
//! the 13 convolutions and, optionally, `classifier.0.*` / `classifier.3.*`
//! for the two hidden fully-connected layers (used by FCN-8s after reshaping
//! to convolutions).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use sha2::{Digest, Sha256};

use super::layers::{max_pool2, relu, Conv2d, ConvOpts};
use super::params::ParamStore;
use crate::error::{Error, Result};

/// Output widths of the five VGG-16 stages.
pub const VGG16_STAGES: [&[usize]; 5] = [
    &[64, 64],
    &[128, 128],
    &[256, 256, 256],
    &[512, 512, 512],
    &[512, 512, 512],
];

/// Parameter count of the 13 VGG-16 convolutions (weights and biases).
pub const VGG16_CONV_PARAMS: usize = 14_714_688;

/// Location and optional SHA-256 digest of a pretrained weight archive.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PretrainedWeights {
    pub path: PathBuf,
    #[serde(default)]
    pub sha256: Option<String>,
}

impl PretrainedWeights {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            sha256: None,
        }
    }

    /// Read the archive after checking its digest.
    pub fn load(&self, device: &Device) -> Result<HashMap<String, Tensor>> {
        let bytes = std::fs::read(&self.path).map_err(|e| {
            Error::WeightLoad(format!("cannot read {}: {e}", self.path.display()))
        })?;
        if let Some(expected) = &self.sha256 {
            let actual = hex::encode(Sha256::digest(&bytes));
            if !actual.eq_ignore_ascii_case(expected.trim()) {
                return Err(Error::Integrity {
                    path: self.path.clone(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        candle_core::safetensors::load_buffer(&bytes, device)
            .map_err(|e| Error::WeightLoad(format!("{}: {e}", self.path.display())))
    }
}

/// torchvision `features` index of convolution `j` in stage `stage`.
pub fn features_index(stage: usize, j: usize) -> usize {
    let mut idx = 0;
    for (s, widths) in VGG16_STAGES.iter().enumerate() {
        for k in 0..widths.len() {
            if s == stage && k == j {
                return idx;
            }
            idx += 2; // conv + relu
        }
        idx += 1; // pool
    }
    panic!("stage {stage} conv {j} out of range")
}

pub(crate) struct Vgg16Encoder {
    stages: Vec<Vec<Conv2d>>,
    prefix: String,
    widths: Vec<usize>,
}

impl Vgg16Encoder {
    pub fn new(store: &mut ParamStore, prefix: &str, divisor: usize) -> Result<Self> {
        let mut stages = Vec::new();
        let mut widths = Vec::new();
        let mut cin = 3;
        for (s, stage) in VGG16_STAGES.iter().enumerate() {
            let mut convs = Vec::new();
            for (j, &w) in stage.iter().enumerate() {
                let cout = scaled(w, divisor);
                let name = format!("{prefix}.features.{}", features_index(s, j));
                convs.push(Conv2d::new(store, &name, cin, cout, 3, ConvOpts::same(3))?);
                cin = cout;
            }
            widths.push(cin);
            stages.push(convs);
        }
        Ok(Self {
            stages,
            prefix: prefix.to_string(),
            widths,
        })
    }

    /// Output channels of each stage.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Pre-pooling activations of each stage (full, 1/2, 1/4, 1/8, 1/16
    /// resolution).
    pub fn forward(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut outs = Vec::with_capacity(5);
        let mut h = x.clone();
        for (s, convs) in self.stages.iter().enumerate() {
            if s > 0 {
                h = max_pool2(&h)?;
            }
            for conv in convs {
                h = relu(&conv.forward(&h)?)?;
            }
            outs.push(h.clone());
        }
        Ok(outs)
    }

    /// Copy the 13 pretrained convolutions into the encoder.
    pub fn load_pretrained(&self, store: &ParamStore, weights: &HashMap<String, Tensor>) -> Result<()> {
        for (s, stage) in VGG16_STAGES.iter().enumerate() {
            for j in 0..stage.len() {
                let idx = features_index(s, j);
                for part in ["weight", "bias"] {
                    let src = format!("features.{idx}.{part}");
                    let t = weights
                        .get(&src)
                        .ok_or_else(|| Error::WeightLoad(format!("archive lacks {src}")))?;
                    store.assign(&format!("{}.{src}", self.prefix), t)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn scaled(width: usize, divisor: usize) -> usize {
    (width / divisor).max(2)
}

/// Write a safetensors archive with the canonical VGG-16 layer names.
pub fn save_vgg16_archive(tensors: &HashMap<String, Tensor>, path: &Path) -> Result<()> {
    candle_core::safetensors::save(tensors, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torchvision_indices() {
        let all: Vec<usize> = VGG16_STAGES
            .iter()
            .enumerate()
            .flat_map(|(s, w)| (0..w.len()).map(move |j| features_index(s, j)))
            .collect();
        assert_eq!(all, vec![0, 2, 5, 7, 10, 12, 14, 17, 19, 21, 24, 26, 28]);
    }

    #[test]
    fn conv_parameter_count_matches_arithmetic() {
        // independent arithmetic: sum over layers of 9*cin*cout + cout
        let mut cin = 3;
        let mut total = 0;
        for stage in VGG16_STAGES {
            for &cout in stage {
                total += 9 * cin * cout + cout;
                cin = cout;
            }
        }
        assert_eq!(total, VGG16_CONV_PARAMS);
        let mut store = ParamStore::new(0, Device::Cpu);
        Vgg16Encoder::new(&mut store, "encoder", 1).unwrap();
        assert_eq!(store.count("encoder."), VGG16_CONV_PARAMS);
    }
}
