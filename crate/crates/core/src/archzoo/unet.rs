//! U-Net whose contracting path is the VGG-16 convolutional stack.
//!
//! The expanding path has five stages mirroring the encoder widths in reverse
//! (512, 512, 256, 128, 64). Each stage doubles the resolution with a 2x2
//! transposed convolution, concatenates the same-scale encoder activation and
//! applies two 3x3 convolutions.

use std::collections::HashMap;

use candle_core::Tensor;

use super::layers::{cat_channels, max_pool2, relu, Conv2d, ConvOpts, ConvTranspose2d};
use super::params::ParamStore;
use super::vgg::{scaled, Vgg16Encoder};
use crate::error::Result;

const DECODER_WIDTHS: [usize; 5] = [512, 512, 256, 128, 64];

struct UpStage {
    up: ConvTranspose2d,
    conv1: Conv2d,
    conv2: Conv2d,
}

pub(crate) struct UnetVgg16 {
    encoder: Vgg16Encoder,
    decoder: Vec<UpStage>,
    head: Conv2d,
}

impl UnetVgg16 {
    pub fn new(store: &mut ParamStore, num_classes: usize, divisor: usize) -> Result<Self> {
        let encoder = Vgg16Encoder::new(store, "encoder", divisor)?;
        let skips: Vec<usize> = encoder.widths().iter().rev().copied().collect();
        let mut cin = *encoder.widths().last().expect("five stages");
        let mut decoder = Vec::new();
        for (i, (&w, &skip)) in DECODER_WIDTHS.iter().zip(&skips).enumerate() {
            let w = scaled(w, divisor);
            let name = format!("decoder.{i}");
            let up = ConvTranspose2d::new(store, &format!("{name}.up"), cin, w, 2, 2, 0, 0)?;
            let conv1 = Conv2d::new(store, &format!("{name}.conv1"), w + skip, w, 3, ConvOpts::same(3))?;
            let conv2 = Conv2d::new(store, &format!("{name}.conv2"), w, w, 3, ConvOpts::same(3))?;
            decoder.push(UpStage { up, conv1, conv2 });
            cin = w;
        }
        let head = Conv2d::new(store, "head", cin, num_classes, 1, ConvOpts::same(1))?;
        Ok(Self {
            encoder,
            decoder,
            head,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let feats = self.encoder.forward(x)?;
        let mut h = max_pool2(feats.last().expect("five stages"))?;
        for (stage, skip) in self.decoder.iter().zip(feats.iter().rev()) {
            h = relu(&stage.up.forward(&h)?)?;
            h = cat_channels(&[&h, skip])?;
            h = relu(&stage.conv1.forward(&h)?)?;
            h = relu(&stage.conv2.forward(&h)?)?;
        }
        self.head.forward(&h)
    }

    pub fn load_pretrained(&self, store: &ParamStore, weights: &HashMap<String, Tensor>) -> Result<()> {
        self.encoder.load_pretrained(store, weights)
    }
}
