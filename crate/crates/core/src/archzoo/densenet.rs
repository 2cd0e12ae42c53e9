//! Fully convolutional DenseNet ("Tiramisu"), 56-layer configuration by
//! default: 4 layers per dense block, growth rate 12, five transitions down
//! and up.

use candle_core::Tensor;

use super::layers::{cat_channels, max_pool2, relu, BatchNorm, Conv2d, ConvOpts, ConvTranspose2d, Dropout};
use super::params::ParamStore;
use super::vgg::scaled;
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub(crate) struct DenseNetConfig {
    pub first_filters: usize,
    pub growth: usize,
    pub layers_per_block: usize,
    pub levels: usize,
    pub dropout: f32,
}

impl DenseNetConfig {
    pub const FC_DENSENET56: Self = Self {
        first_filters: 48,
        growth: 12,
        layers_per_block: 4,
        levels: 5,
        dropout: 0.2,
    };
}

/// BN - ReLU - 3x3 conv - dropout
struct DenseLayer {
    bn: BatchNorm,
    conv: Conv2d,
    drop: Dropout,
}

impl DenseLayer {
    fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let h = relu(&self.bn.forward_t(x, train)?)?;
        self.drop.forward_t(&self.conv.forward(&h)?, train)
    }
}

struct DenseBlock {
    layers: Vec<DenseLayer>,
}

impl DenseBlock {
    fn new(store: &mut ParamStore, name: &str, cin: usize, cfg: &DenseNetConfig, growth: usize) -> Result<Self> {
        let mut layers = Vec::new();
        let mut c = cin;
        for i in 0..cfg.layers_per_block {
            let n = format!("{name}.layer{i}");
            layers.push(DenseLayer {
                bn: BatchNorm::new(store, &format!("{n}.bn"), c)?,
                conv: Conv2d::new(store, &format!("{n}.conv"), c, growth, 3, ConvOpts::same(3))?,
                drop: Dropout::new(store, cfg.dropout),
            });
            c += growth;
        }
        Ok(Self { layers })
    }

    /// Returns (input ++ new features, new features only).
    fn forward_t(&self, x: &Tensor, train: bool) -> Result<(Tensor, Tensor)> {
        let mut stack = x.clone();
        let mut new = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let f = layer.forward_t(&stack, train)?;
            stack = cat_channels(&[&stack, &f])?;
            new.push(f);
        }
        let refs: Vec<&Tensor> = new.iter().collect();
        Ok((stack, cat_channels(&refs)?))
    }
}

/// BN - ReLU - 1x1 conv - dropout - 2x2 max pool
struct TransitionDown {
    bn: BatchNorm,
    conv: Conv2d,
    drop: Dropout,
}

impl TransitionDown {
    fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let h = relu(&self.bn.forward_t(x, train)?)?;
        let h = self.drop.forward_t(&self.conv.forward(&h)?, train)?;
        max_pool2(&h)
    }
}

pub(crate) struct FcDenseNet {
    first: Conv2d,
    down_blocks: Vec<DenseBlock>,
    transitions_down: Vec<TransitionDown>,
    bottleneck: DenseBlock,
    transitions_up: Vec<ConvTranspose2d>,
    up_blocks: Vec<DenseBlock>,
    head: Conv2d,
}

impl FcDenseNet {
    pub fn new(store: &mut ParamStore, num_classes: usize, divisor: usize, cfg: DenseNetConfig) -> Result<Self> {
        let growth = scaled(cfg.growth, divisor);
        let first_filters = scaled(cfg.first_filters, divisor);
        let first = Conv2d::new(store, "first", 3, first_filters, 3, ConvOpts::same(3))?;
        let mut c = first_filters;
        let mut skips = Vec::new();
        let mut down_blocks = Vec::new();
        let mut transitions_down = Vec::new();
        for i in 0..cfg.levels {
            down_blocks.push(DenseBlock::new(store, &format!("down{i}"), c, &cfg, growth)?);
            c += cfg.layers_per_block * growth;
            skips.push(c);
            transitions_down.push(TransitionDown {
                bn: BatchNorm::new(store, &format!("td{i}.bn"), c)?,
                conv: Conv2d::new(store, &format!("td{i}.conv"), c, c, 1, ConvOpts::same(1))?,
                drop: Dropout::new(store, cfg.dropout),
            });
        }
        let bottleneck = DenseBlock::new(store, "bottleneck", c, &cfg, growth)?;
        let mut up_c = cfg.layers_per_block * growth;
        let mut transitions_up = Vec::new();
        let mut up_blocks = Vec::new();
        let mut last_out = 0;
        for (i, &skip) in skips.iter().rev().enumerate() {
            transitions_up.push(ConvTranspose2d::new(store, &format!("tu{i}"), up_c, up_c, 3, 2, 1, 1)?);
            let cin = up_c + skip;
            up_blocks.push(DenseBlock::new(store, &format!("up{i}"), cin, &cfg, growth)?);
            last_out = cin + cfg.layers_per_block * growth;
            up_c = cfg.layers_per_block * growth;
        }
        let head = Conv2d::new(store, "head", last_out, num_classes, 1, ConvOpts::same(1))?;
        Ok(Self {
            first,
            down_blocks,
            transitions_down,
            bottleneck,
            transitions_up,
            up_blocks,
            head,
        })
    }

    pub fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut h = self.first.forward(x)?;
        let mut skips = Vec::new();
        for (block, td) in self.down_blocks.iter().zip(&self.transitions_down) {
            let (stack, _) = block.forward_t(&h, train)?;
            h = td.forward_t(&stack, train)?;
            skips.push(stack);
        }
        let (_, mut new) = self.bottleneck.forward_t(&h, train)?;
        let last = self.up_blocks.len() - 1;
        let mut out = None;
        for (i, ((tu, block), skip)) in self
            .transitions_up
            .iter()
            .zip(&self.up_blocks)
            .zip(skips.iter().rev())
            .enumerate()
        {
            let up = tu.forward(&new)?;
            let merged = cat_channels(&[&up, skip])?;
            let (stack, fresh) = block.forward_t(&merged, train)?;
            if i == last {
                out = Some(stack);
            }
            new = fresh;
        }
        self.head.forward(&out.expect("at least one level"))
    }
}
