//! FCN-8s over VGG-16.
//!
//! The two hidden fully-connected layers become a 7x7 and a 1x1 convolution;
//! class scores are upsampled by learned transposed convolutions (initialized
//! to bilinear interpolation) and fused with scores from pool4 and pool3
//! before a final fixed 8x bilinear upsampling. Convolutions are padded so
//! that no cropping is needed for inputs whose side is a multiple of 32.

use std::collections::HashMap;

use candle_core::Tensor;

use super::layers::{max_pool2, relu, Conv2d, ConvOpts, ConvTranspose2d, Dropout};
use super::params::ParamStore;
use super::vgg::{scaled, Vgg16Encoder};
use crate::error::{Error, Result};

const FC_WIDTH: usize = 4096;

pub(crate) struct Fcn8s {
    encoder: Vgg16Encoder,
    fc6: Conv2d,
    fc7: Conv2d,
    drop6: Dropout,
    drop7: Dropout,
    score_fr: Conv2d,
    score_pool4: Conv2d,
    score_pool3: Conv2d,
    upscore2: ConvTranspose2d,
    upscore_pool4: ConvTranspose2d,
    upscore8: ConvTranspose2d,
    fc_width: usize,
}

impl Fcn8s {
    pub fn new(store: &mut ParamStore, num_classes: usize, divisor: usize) -> Result<Self> {
        let encoder = Vgg16Encoder::new(store, "encoder", divisor)?;
        let w = encoder.widths().to_vec();
        let fc_width = scaled(FC_WIDTH, divisor);
        let fc6 = Conv2d::new(store, "fc6", w[4], fc_width, 7, ConvOpts::same(7))?;
        let fc7 = Conv2d::new(store, "fc7", fc_width, fc_width, 1, ConvOpts::same(1))?;
        let drop6 = Dropout::new(store, 0.5);
        let drop7 = Dropout::new(store, 0.5);
        let score_fr = Conv2d::new(store, "score_fr", fc_width, num_classes, 1, ConvOpts::same(1))?;
        let score_pool4 = Conv2d::new(store, "score_pool4", w[3], num_classes, 1, ConvOpts::same(1))?;
        let score_pool3 = Conv2d::new(store, "score_pool3", w[2], num_classes, 1, ConvOpts::same(1))?;
        let upscore2 = ConvTranspose2d::bilinear(store, "upscore2", num_classes, 4, 2, 1)?;
        let upscore_pool4 = ConvTranspose2d::bilinear(store, "upscore_pool4", num_classes, 4, 2, 1)?;
        let upscore8 = ConvTranspose2d::fixed_bilinear(store, num_classes, 16, 8, 4)?;
        Ok(Self {
            encoder,
            fc6,
            fc7,
            drop6,
            drop7,
            score_fr,
            score_pool4,
            score_pool3,
            upscore2,
            upscore_pool4,
            upscore8,
            fc_width,
        })
    }

    pub fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let feats = self.encoder.forward(x)?;
        let pool3 = max_pool2(&feats[2])?;
        let pool4 = max_pool2(&feats[3])?;
        let pool5 = max_pool2(&feats[4])?;
        let h = self.drop6.forward_t(&relu(&self.fc6.forward(&pool5)?)?, train)?;
        let h = self.drop7.forward_t(&relu(&self.fc7.forward(&h)?)?, train)?;
        let score = self.score_fr.forward(&h)?;
        let up2 = self.upscore2.forward(&score)?;
        let fuse4 = (up2 + self.score_pool4.forward(&pool4)?)?;
        let up4 = self.upscore_pool4.forward(&fuse4)?;
        let fuse3 = (up4 + self.score_pool3.forward(&pool3)?)?;
        self.upscore8.forward(&fuse3)
    }

    /// Load the encoder, plus `classifier.0` / `classifier.3` into fc6 / fc7
    /// when the archive carries them.
    pub fn load_pretrained(&self, store: &ParamStore, weights: &HashMap<String, Tensor>) -> Result<()> {
        self.encoder.load_pretrained(store, weights)?;
        let fc = [("classifier.0", "fc6", 7usize), ("classifier.3", "fc7", 1)];
        let present = fc
            .iter()
            .filter(|(src, _, _)| weights.contains_key(&format!("{src}.weight")))
            .count();
        if present == 0 {
            log::info!("weight archive has no classifier layers; fc6/fc7 keep their initialization");
            return Ok(());
        }
        for (src, dst, k) in fc {
            let w = weights
                .get(&format!("{src}.weight"))
                .ok_or_else(|| Error::WeightLoad(format!("archive lacks {src}.weight")))?;
            let b = weights
                .get(&format!("{src}.bias"))
                .ok_or_else(|| Error::WeightLoad(format!("archive lacks {src}.bias")))?;
            let cin = w.dim(1)? / (k * k);
            let w = w.reshape((self.fc_width, cin, k, k))?;
            store.assign(&format!("{dst}.weight"), &w)?;
            store.assign(&format!("{dst}.bias"), b)?;
        }
        Ok(())
    }
}
