use std::sync::Mutex;

use candle_core::{ModuleT, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvOpts {
    pub padding: usize,
    pub stride: usize,
    pub dilation: usize,
    pub bias: bool,
}

impl ConvOpts {
    /// Stride 1, padding that preserves the spatial size for kernel `k`.
    pub fn same(k: usize) -> Self {
        Self {
            padding: k / 2,
            stride: 1,
            dilation: 1,
            bias: true,
        }
    }

    pub fn stride(mut self, s: usize) -> Self {
        self.stride = s;
        self
    }

    pub fn dilated(mut self, d: usize, k: usize) -> Self {
        self.dilation = d;
        self.padding = d * (k / 2);
        self
    }

    pub fn no_bias(mut self) -> Self {
        self.bias = false;
        self
    }
}

pub(crate) struct Conv2d {
    weight: Tensor,
    bias: Option<Tensor>,
    opts: ConvOpts,
}

impl Conv2d {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, k: usize, opts: ConvOpts) -> Result<Self> {
        let weight = store.he_uniform(&format!("{name}.weight"), &[cout, cin, k, k])?;
        let bias = if opts.bias {
            Some(store.constant(&format!("{name}.bias"), &[cout], 0.0)?)
        } else {
            None
        };
        Ok(Self { weight, bias, opts })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let o = &self.opts;
        let y = x.conv2d(&self.weight, o.padding, o.stride, o.dilation, 1)?;
        Ok(match &self.bias {
            Some(b) => y.broadcast_add(&b.reshape((1, (), 1, 1))?)?,
            None => y,
        })
    }
}

pub(crate) struct ConvTranspose2d {
    weight: Tensor,
    bias: Option<Tensor>,
    padding: usize,
    output_padding: usize,
    stride: usize,
}

impl ConvTranspose2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        let weight = store.he_uniform(&format!("{name}.weight"), &[cin, cout, k, k])?;
        let bias = Some(store.constant(&format!("{name}.bias"), &[cout], 0.0)?);
        Ok(Self {
            weight,
            bias,
            padding,
            output_padding,
            stride,
        })
    }

    /// Trainable upsampler initialized to bilinear interpolation, no bias.
    pub fn bilinear(store: &mut ParamStore, name: &str, channels: usize, k: usize, stride: usize, padding: usize) -> Result<Self> {
        let w = bilinear_kernel(channels, k, store.device())?;
        let weight = store.from_tensor(&format!("{name}.weight"), w)?;
        Ok(Self {
            weight,
            bias: None,
            padding,
            output_padding: 0,
            stride,
        })
    }

    /// Fixed (non-trainable) bilinear upsampler.
    pub fn fixed_bilinear(store: &ParamStore, channels: usize, k: usize, stride: usize, padding: usize) -> Result<Self> {
        Ok(Self {
            weight: bilinear_kernel(channels, k, store.device())?,
            bias: None,
            padding,
            output_padding: 0,
            stride,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv_transpose2d(&self.weight, self.padding, self.output_padding, self.stride, 1)?;
        Ok(match &self.bias {
            Some(b) => y.broadcast_add(&b.reshape((1, (), 1, 1))?)?,
            None => y,
        })
    }
}

/// `(C, C, k, k)` transposed-convolution kernel performing per-channel
/// bilinear interpolation.
pub(crate) fn bilinear_kernel(channels: usize, k: usize, device: &candle_core::Device) -> Result<Tensor> {
    let factor = k.div_ceil(2) as f64;
    let center = if k % 2 == 1 { factor - 1.0 } else { factor - 0.5 };
    let tap = |i: usize| 1.0 - (i as f64 - center).abs() / factor;
    let mut data = vec![0f32; channels * channels * k * k];
    for c in 0..channels {
        for i in 0..k {
            for j in 0..k {
                data[((c * channels + c) * k + i) * k + j] = (tap(i) * tap(j)) as f32;
            }
        }
    }
    Ok(Tensor::from_vec(data, (channels, channels, k, k), device)?)
}

pub(crate) struct BatchNorm(candle_nn::BatchNorm);

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        let weight = store.constant(&format!("{name}.weight"), &[channels], 1.0)?;
        let bias = store.constant(&format!("{name}.bias"), &[channels], 0.0)?;
        let mean = store.constant(&format!("{name}.running_mean"), &[channels], 0.0)?;
        let var = store.constant(&format!("{name}.running_var"), &[channels], 1.0)?;
        Ok(Self(candle_nn::BatchNorm::new(channels, mean, var, weight, bias, 1e-5)?))
    }

    pub fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        Ok(self.0.forward_t(x, train)?)
    }
}

/// Inverted dropout driven by a seeded generator so training runs replay
/// bit-identically.
pub(crate) struct Dropout {
    p: f32,
    rng: Mutex<ChaCha8Rng>,
}

impl Dropout {
    pub fn new(store: &mut ParamStore, p: f32) -> Self {
        Self {
            p,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(store.fork_seed())),
        }
    }

    pub fn forward_t(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        if !train || self.p == 0.0 {
            return Ok(x.clone());
        }
        let keep = 1.0 - self.p;
        let scale = 1.0 / keep;
        let n = x.elem_count();
        let mut rng = self.rng.lock().expect("dropout rng");
        let mask: Vec<f32> = (0..n)
            .map(|_| if rng.gen::<f32>() < keep { scale } else { 0.0 })
            .collect();
        let mask = Tensor::from_vec(mask, x.shape(), x.device())?;
        Ok((x * mask)?)
    }
}

pub(crate) fn relu(x: &Tensor) -> Result<Tensor> {
    Ok(x.relu()?)
}

pub(crate) fn max_pool2(x: &Tensor) -> Result<Tensor> {
    Ok(x.max_pool2d(2)?)
}

pub(crate) fn cat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    Ok(Tensor::cat(xs, 1)?)
}

pub(crate) fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}
