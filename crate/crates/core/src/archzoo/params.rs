//! Named parameter storage with seeded initialization.

use candle_core::{DType, Device, Tensor, Var};
use candle_nn::VarMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Suffix of buffers that are saved with the model but never optimized.
pub(crate) const BUFFER_MARKER: &str = "running_";

pub struct ParamStore {
    varmap: VarMap,
    rng: ChaCha8Rng,
    device: Device,
}

impl ParamStore {
    pub fn new(seed: u64, device: Device) -> Self {
        Self {
            varmap: VarMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            device,
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn varmap(&self) -> &VarMap {
        &self.varmap
    }

    pub(crate) fn load_file(&mut self, path: &std::path::Path) -> candle_core::Result<()> {
        self.varmap.load(path)
    }

    /// Draw an independent seed for a sub-component (dropout streams).
    pub(crate) fn fork_seed(&mut self) -> u64 {
        self.rng.gen()
    }

    fn insert(&mut self, name: &str, t: Tensor) -> Result<Tensor> {
        let var = Var::from_tensor(&t)?;
        let mut data = self.varmap.data().lock().expect("varmap lock");
        if data.contains_key(name) {
            return Err(Error::Contract(format!("parameter {name} defined twice")));
        }
        let out = var.as_tensor().clone();
        data.insert(name.to_string(), var);
        Ok(out)
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let b = bound as f32;
        let values: Vec<f32> = (0..n).map(|_| self.rng.gen_range(-b..=b)).collect();
        let t = Tensor::from_vec(values, shape, &self.device)?;
        self.insert(name, t)
    }

    /// Fan-in scaled uniform (He) initialization; `fan_in` is the product of
    /// all dimensions but the first.
    pub fn he_uniform(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let fan_in: usize = shape[1..].iter().product();
        self.uniform(name, shape, (6.0 / fan_in.max(1) as f64).sqrt())
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f32) -> Result<Tensor> {
        let t = (Tensor::ones(shape, DType::F32, &self.device)? * value as f64)?;
        self.insert(name, t)
    }

    pub fn from_tensor(&mut self, name: &str, t: Tensor) -> Result<Tensor> {
        self.insert(name, t)
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .varmap
            .data()
            .lock()
            .expect("varmap lock")
            .keys()
            .cloned()
            .collect();
        v.sort();
        v
    }

    pub fn get(&self, name: &str) -> Option<Tensor> {
        self.varmap
            .data()
            .lock()
            .expect("varmap lock")
            .get(name)
            .map(|v| v.as_tensor().clone())
    }

    /// Overwrite a parameter in place (shape must match).
    pub fn assign(&self, name: &str, value: &Tensor) -> Result<()> {
        let data = self.varmap.data().lock().expect("varmap lock");
        let var = data
            .get(name)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name}")))?;
        if var.shape() != value.shape() {
            return Err(Error::WeightLoad(format!(
                "{name}: shape {:?} does not match {:?}",
                value.shape(),
                var.shape()
            )));
        }
        var.set(&value.to_dtype(DType::F32)?.to_device(&self.device)?)?;
        Ok(())
    }

    /// Variables updated by the optimizer, in name order.
    pub fn trainable(&self) -> Vec<Var> {
        let data = self.varmap.data().lock().expect("varmap lock");
        let mut named: Vec<(&String, &Var)> = data
            .iter()
            .filter(|(k, _)| !k.contains(BUFFER_MARKER))
            .collect();
        named.sort_by(|a, b| a.0.cmp(b.0));
        named.into_iter().map(|(_, v)| v.clone()).collect()
    }

    /// Total element count of parameters whose name starts with `prefix`.
    pub fn count(&self, prefix: &str) -> usize {
        self.varmap
            .data()
            .lock()
            .expect("varmap lock")
            .iter()
            .filter(|(k, _)| k.starts_with(prefix) && !k.contains(BUFFER_MARKER))
            .map(|(_, v)| v.elem_count())
            .sum()
    }
}
