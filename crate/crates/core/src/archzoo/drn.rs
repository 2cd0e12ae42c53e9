//! DRN-C-26: a residual network whose last two residual stages trade stride
//! for dilation (output stride 8), followed by two plain dilated convolution
//! stages that remove gridding artifacts. A 1x1 classifier produces class
//! scores at 1/8 resolution, upsampled by a fixed bilinear 16x16 transposed
//! convolution.

use candle_core::Tensor;

use super::layers::{relu, BatchNorm, Conv2d, ConvOpts, ConvTranspose2d};
use super::params::ParamStore;
use super::vgg::scaled;
use crate::error::Result;

const CHANNELS: [usize; 8] = [16, 32, 64, 128, 256, 512, 512, 512];

struct ConvBnRelu {
    conv: Conv2d,
    bn: BatchNorm,
}

impl ConvBnRelu {
    fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, k: usize, opts: ConvOpts) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), cin, cout, k, opts.no_bias())?,
            bn: BatchNorm::new(store, &format!("{name}.bn"), cout)?,
        })
    }

    fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        relu(&self.bn.forward_t(&self.conv.forward(x)?, train)?)
    }
}

struct BasicBlock {
    conv1: Conv2d,
    bn1: BatchNorm,
    conv2: Conv2d,
    bn2: BatchNorm,
    downsample: Option<(Conv2d, BatchNorm)>,
}

impl BasicBlock {
    #[allow(clippy::too_many_arguments)]
    fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        stride: usize,
        dilation: (usize, usize),
    ) -> Result<Self> {
        let conv1 = Conv2d::new(
            store,
            &format!("{name}.conv1"),
            cin,
            cout,
            3,
            ConvOpts::same(3).dilated(dilation.0, 3).stride(stride).no_bias(),
        )?;
        let bn1 = BatchNorm::new(store, &format!("{name}.bn1"), cout)?;
        let conv2 = Conv2d::new(
            store,
            &format!("{name}.conv2"),
            cout,
            cout,
            3,
            ConvOpts::same(3).dilated(dilation.1, 3).no_bias(),
        )?;
        let bn2 = BatchNorm::new(store, &format!("{name}.bn2"), cout)?;
        let downsample = if stride != 1 || cin != cout {
            Some((
                Conv2d::new(
                    store,
                    &format!("{name}.downsample.conv"),
                    cin,
                    cout,
                    1,
                    ConvOpts::same(1).stride(stride).no_bias(),
                )?,
                BatchNorm::new(store, &format!("{name}.downsample.bn"), cout)?,
            ))
        } else {
            None
        };
        Ok(Self {
            conv1,
            bn1,
            conv2,
            bn2,
            downsample,
        })
    }

    fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let h = relu(&self.bn1.forward_t(&self.conv1.forward(x)?, train)?)?;
        let h = self.bn2.forward_t(&self.conv2.forward(&h)?, train)?;
        let residual = match &self.downsample {
            Some((conv, bn)) => bn.forward_t(&conv.forward(x)?, train)?,
            None => x.clone(),
        };
        relu(&(h + residual)?)
    }
}

enum Stage {
    Plain(Vec<ConvBnRelu>),
    Residual(Vec<BasicBlock>),
}

impl Stage {
    fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut h = x.clone();
        match self {
            Stage::Plain(layers) => {
                for l in layers {
                    h = l.forward_t(&h, train)?;
                }
            }
            Stage::Residual(blocks) => {
                for b in blocks {
                    h = b.forward_t(&h, train)?;
                }
            }
        }
        Ok(h)
    }
}

pub(crate) struct DrnC26 {
    stem: ConvBnRelu,
    stages: Vec<Stage>,
    seg: Conv2d,
    up: ConvTranspose2d,
}

impl DrnC26 {
    pub fn new(store: &mut ParamStore, num_classes: usize, divisor: usize) -> Result<Self> {
        let ch: Vec<usize> = CHANNELS.iter().map(|&c| scaled(c, divisor)).collect();
        let stem = ConvBnRelu::new(store, "layer0", 3, ch[0], 7, ConvOpts::same(7))?;
        let mut stages = Vec::new();
        // layer1, layer2: single conv each, the second strided
        stages.push(Stage::Plain(vec![ConvBnRelu::new(
            store, "layer1.0", ch[0], ch[0], 3, ConvOpts::same(3),
        )?]));
        stages.push(Stage::Plain(vec![ConvBnRelu::new(
            store, "layer2.0", ch[0], ch[1], 3, ConvOpts::same(3).stride(2),
        )?]));
        // layer3..layer6: two residual blocks each
        let residual = [
            (ch[1], ch[2], 2usize, 1usize),
            (ch[2], ch[3], 2, 1),
            (ch[3], ch[4], 1, 2),
            (ch[4], ch[5], 1, 4),
        ];
        for (i, &(cin, cout, stride, dilation)) in residual.iter().enumerate() {
            let name = format!("layer{}", i + 3);
            let first_dilation = if dilation == 1 { (1, 1) } else { (dilation / 2, dilation) };
            let b0 = BasicBlock::new(store, &format!("{name}.0"), cin, cout, stride, first_dilation)?;
            let b1 = BasicBlock::new(store, &format!("{name}.1"), cout, cout, 1, (dilation, dilation))?;
            stages.push(Stage::Residual(vec![b0, b1]));
        }
        // layer7 (dilation 2) and layer8 (dilation 1), no residuals
        stages.push(Stage::Plain(vec![ConvBnRelu::new(
            store, "layer7.0", ch[5], ch[6], 3, ConvOpts::same(3).dilated(2, 3),
        )?]));
        stages.push(Stage::Plain(vec![ConvBnRelu::new(
            store, "layer8.0", ch[6], ch[7], 3, ConvOpts::same(3),
        )?]));
        let seg = Conv2d::new(store, "seg", ch[7], num_classes, 1, ConvOpts::same(1))?;
        let up = ConvTranspose2d::fixed_bilinear(store, num_classes, 16, 8, 4)?;
        Ok(Self { stem, stages, seg, up })
    }

    pub fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut h = self.stem.forward_t(x, train)?;
        for stage in &self.stages {
            h = stage.forward_t(&h, train)?;
        }
        self.up.forward(&self.seg.forward(&h)?)
    }
}
