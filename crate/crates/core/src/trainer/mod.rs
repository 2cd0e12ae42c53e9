//! Optimization of a [`SegmentationModel`] under one of the overlap losses.
//!
//! Loss values and their gradients with respect to the output probabilities
//! come from [`crate::losses`]; the network backward pass starts from those
//! gradients, so the value being minimized is exactly the loss module's.

mod checkpoint;
mod config;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use candle_core::{DType, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use config::{apply_override, parse_override, ExperimentConfig};

use crate::archzoo::{inputs_to_tensor, ArchSpec, PretrainedWeights, SegmentationModel};
use crate::dataset::{augment, AugmentParams, FoldSplit, MaskSet, TrainSample};
use crate::error::{Error, Result};
use crate::losses::{ClassSet, LossSpec};
use crate::structure::Structure;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Which structures a model predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClassMode {
    Multi,
    Single(Structure),
}

impl ClassMode {
    pub fn class_set(self) -> ClassSet {
        match self {
            ClassMode::Multi => ClassSet::all(),
            ClassMode::Single(s) => ClassSet::single(s),
        }
    }
}

impl fmt::Display for ClassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassMode::Multi => f.write_str("multi"),
            ClassMode::Single(s) => f.write_str(s.name()),
        }
    }
}

impl FromStr for ClassMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("multi") {
            return Ok(ClassMode::Multi);
        }
        s.parse::<Structure>()
            .map(ClassMode::Single)
            .map_err(|_| Error::Config(format!("class mode `{s}` is neither `multi` nor a structure name")))
    }
}

impl TryFrom<String> for ClassMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClassMode> for String {
    fn from(m: ClassMode) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub name: String,
    pub arch: ArchSpec,
    pub loss: LossSpec,
    pub class_mode: ClassMode,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// `None` disables augmentation.
    pub augment: Option<AugmentParams>,
    pub train_fold: u8,
    pub weights: Option<PretrainedWeights>,
}

impl TrainConfig {
    /// Default hyperparameters: Adam at 1e-5 for 100 epochs, batches of 4,
    /// Dice loss, all three structures, standard augmentation.
    pub fn new(name: impl Into<String>, arch: ArchSpec) -> Self {
        Self {
            name: name.into(),
            arch,
            loss: LossSpec::new(crate::losses::LossKind::Dsc),
            class_mode: ClassMode::Multi,
            lr: 1e-5,
            epochs: 100,
            batch_size: 4,
            seed: 0,
            augment: Some(AugmentParams::default()),
            train_fold: 1,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !matches!(self.train_fold, 1 | 2) {
            return Err(Error::Config(format!("train_fold must be 1 or 2, got {}", self.train_fold)));
        }
        self.arch.validate()?;
        self.loss.validate()?;
        let k = self.class_mode.class_set().len();
        if k != self.arch.num_classes {
            return Err(Error::Config(format!(
                "class_mode `{}` needs num_classes = {k}, arch has {}",
                self.class_mode, self.arch.num_classes
            )));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        if self.arch.pretrained_encoder && self.weights.is_none() {
            return Err(Error::Config(
                "pretrained_encoder is set but no [weights] path is configured".into(),
            ));
        }
        Ok(())
    }

    /// Number of optimizer steps per epoch on `n` samples.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const AUGMENT_STREAM: u64 = 0x4155_474d;
const INIT_STREAM: u64 = 0x494e_4954;

/// Deterministic sub-seed for `(stream, a, b)` under `master`.
pub fn derive_seed(master: u64, stream: u64, a: u64, b: u64) -> u64 {
    let mut z = master;
    for v in [stream, a, b] {
        z = splitmix64(z ^ v);
    }
    z
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Batch loss and its gradient with respect to `probs`.
///
/// `probs` is `(batch, classes, H, W)`. The per-sample loss is the sum over
/// classes; the batch loss is the mean over samples.
pub fn batch_loss_and_grad(
    probs: &Tensor,
    targets: &[&MaskSet],
    spec: &LossSpec,
    classes: &ClassSet,
) -> Result<(f64, Tensor)> {
    let (b, c, h, w) = probs.dims4()?;
    if b != targets.len() || c != classes.len() {
        return Err(Error::Contract(format!(
            "probabilities {:?} do not match {} targets x {} classes",
            probs.dims(),
            targets.len(),
            classes.len()
        )));
    }
    let flat: Vec<f32> = probs.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    let plane = h * w;
    let mut grad = vec![0f32; flat.len()];
    let mut total = 0.0;
    for (i, truth) in targets.iter().enumerate() {
        if truth.resolution() != (h, w) {
            return Err(Error::Contract(format!(
                "ground truth {:?} does not match output {}x{}",
                truth.resolution(),
                h,
                w
            )));
        }
        for (k, &s) in classes.classes().iter().enumerate() {
            let mask = truth.get(s).ok_or_else(|| Error::IncompleteGroundTruth {
                case_id: truth.case_id.clone(),
                structure: s.name().into(),
            })?;
            let start = (i * c + k) * plane;
            let sv: Vec<f64> = flat[start..start + plane].iter().map(|&v| v as f64).collect();
            let gv: Vec<f64> = mask.as_slice().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
            let (l, dl) = spec.loss_and_grad(&sv, &gv)?;
            total += l;
            for (dst, d) in grad[start..start + plane].iter_mut().zip(dl) {
                *dst = (d / b as f64) as f32;
            }
        }
    }
    let grad = Tensor::from_vec(grad, (b, c, h, w), probs.device())?;
    Ok((total / b as f64, grad))
}

/// One model, one optimizer, and the position in the schedule.
pub struct Trainer {
    config: TrainConfig,
    model: SegmentationModel,
    optimizer: AdamW,
    classes: ClassSet,
    epoch: usize,
    batch: usize,
}

impl Trainer {
    /// Build the model described by `config` with seeded initialization.
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = SegmentationModel::new(
            config.arch.clone(),
            config.class_mode.class_set(),
            derive_seed(config.seed, INIT_STREAM, 0, 0),
            config.weights.as_ref(),
        )?;
        Self::with_model(config, model)
    }

    pub fn with_model(config: &TrainConfig, model: SegmentationModel) -> Result<Self> {
        config.validate()?;
        let classes = config.class_mode.class_set();
        if model.class_set() != &classes {
            return Err(Error::Config("model classes differ from the configured class mode".into()));
        }
        let optimizer = AdamW::new(
            model.params().trainable(),
            ParamsAdamW {
                lr: config.lr,
                beta1: ADAM_BETA1,
                beta2: ADAM_BETA2,
                eps: ADAM_EPS,
                weight_decay: 0.0,
            },
        )?;
        Ok(Self {
            config: config.clone(),
            model,
            optimizer,
            classes,
            epoch: 0,
            batch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &SegmentationModel {
        &self.model
    }

    pub fn into_model(self) -> SegmentationModel {
        self.model
    }

    /// Override the step size without touching optimizer state.
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.optimizer.set_learning_rate(lr);
    }

    /// Batch loss on `batch` with the network in training mode, without an
    /// update.
    pub fn batch_loss(&self, batch: &[&TrainSample]) -> Result<f64> {
        let (probs, targets) = self.forward_batch(batch)?;
        Ok(batch_loss_and_grad(&probs, &targets, &self.config.loss, &self.classes)?.0)
    }

    fn forward_batch<'a>(&self, batch: &[&'a TrainSample]) -> Result<(Tensor, Vec<&'a MaskSet>)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch".into()));
        }
        let inputs: Vec<_> = batch.iter().map(|s| &s.input).collect();
        let x = inputs_to_tensor(&inputs, self.model.device())?;
        let probs = self.model.forward_t(&x, true)?;
        Ok((probs, batch.iter().map(|s| &s.masks).collect()))
    }

    /// One Adam update on `batch`; returns the loss before the update.
    pub fn step(&mut self, batch: &[&TrainSample]) -> Result<f64> {
        let (probs, targets) = self.forward_batch(batch)?;
        let (loss, grad) = batch_loss_and_grad(&probs, &targets, &self.config.loss, &self.classes)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: self.epoch,
                batch: self.batch,
                value: loss,
            });
        }
        let surrogate = (probs * grad.detach())?.sum_all()?;
        let grads = surrogate.backward()?;
        self.optimizer.step(&grads)?;
        self.batch += 1;
        Ok(loss)
    }

    /// One pass over `data` in a seed-determined order; returns the mean
    /// batch loss.
    pub fn run_epoch(&mut self, data: &[TrainSample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("training set".into()));
        }
        let epoch = self.epoch as u64;
        let seed = self.config.seed;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM, epoch, 0)));
        self.batch = 0;
        let mut sum = 0.0;
        let mut n = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let owned: Vec<TrainSample> = match &self.config.augment {
                Some(p) => chunk
                    .iter()
                    .map(|&i| {
                        let s = &data[i];
                        let p = p.with_seed(derive_seed(seed, AUGMENT_STREAM, epoch, i as u64));
                        let (input, masks) = augment(&s.input, &s.masks, &p)?;
                        Ok(TrainSample {
                            case_id: s.case_id.clone(),
                            input,
                            masks,
                        })
                    })
                    .collect::<Result<_>>()?,
                None => Vec::new(),
            };
            let batch: Vec<&TrainSample> = if owned.is_empty() {
                chunk.iter().map(|&i| &data[i]).collect()
            } else {
                owned.iter().collect()
            };
            sum += self.step(&batch)?;
            n += 1;
        }
        self.epoch += 1;
        Ok(sum / n as f64)
    }
}

/// Train a fresh model on `data` for `config.epochs` epochs.
pub fn train(config: &TrainConfig, data: &[TrainSample]) -> Result<Checkpoint> {
    train_with(config, data, |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with(
    config: &TrainConfig,
    data: &[TrainSample],
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Checkpoint> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let classes = config.class_mode.class_set();
    let side = config.arch.input_size;
    for s in data {
        if s.input.shape() != (side, side) {
            return Err(Error::Contract(format!(
                "case {} is {:?}, model expects {side}x{side}",
                s.case_id,
                s.input.shape()
            )));
        }
        if let Some(missing) = classes.classes().iter().find(|c| s.masks.get(**c).is_none()) {
            return Err(Error::IncompleteGroundTruth {
                case_id: s.case_id.clone(),
                structure: missing.name().into(),
            });
        }
    }
    let mut trainer = Trainer::new(config)?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut seconds = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let loss = trainer.run_epoch(data)?;
        seconds.push(started.elapsed().as_secs_f64());
        history.push(loss);
        log::info!("{} fold {} epoch {}/{}: loss {loss:.6}", config.name, config.train_fold, epoch + 1, config.epochs);
        on_epoch(epoch, loss);
    }
    let meta = CheckpointMeta {
        config: config.clone(),
        epoch: config.epochs,
        loss_history: history,
        epoch_seconds: seconds,
        train_case_ids: data.iter().map(|s| s.case_id.clone()).collect(),
    };
    Ok(Checkpoint {
        meta,
        model: trainer.into_model(),
    })
}

/// Fail if any case is in both sets.
pub fn check_disjoint<'a>(
    train_ids: impl IntoIterator<Item = &'a str>,
    eval_ids: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let train: BTreeSet<&str> = train_ids.into_iter().collect();
    let shared: Vec<&str> = eval_ids.into_iter().filter(|id| train.contains(id)).collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::FoldLeakage(format!(
            "{} case(s) in both training and evaluation sets: {}",
            shared.len(),
            shared.join(", ")
        )))
    }
}

/// Train one model per fold; checkpoint `k` sees only fold `k`.
///
/// `samples` must contain every case of `split`.
pub fn train_two_fold(
    config: &TrainConfig,
    split: &FoldSplit,
    samples: &[TrainSample],
) -> Result<(Checkpoint, Checkpoint)> {
    let by_id: std::collections::BTreeMap<&str, &TrainSample> =
        samples.iter().map(|s| (s.case_id.as_str(), s)).collect();
    let mut out = Vec::with_capacity(2);
    for k in 1..=2u8 {
        let train_ids = split.fold(k)?;
        let eval_ids = split.fold(3 - k)?;
        check_disjoint(train_ids.iter().map(String::as_str), eval_ids.iter().map(String::as_str))?;
        let data = train_ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|s| (*s).clone())
                    .ok_or_else(|| Error::SplitIntegrity(format!("case {id} of fold {k} has no sample")))
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = TrainConfig {
            train_fold: k,
            ..config.clone()
        };
        let ckpt = train(&cfg, &data)?;
        check_disjoint(
            ckpt.meta.train_case_ids.iter().map(String::as_str),
            eval_ids.iter().map(String::as_str),
        )?;
        out.push(ckpt);
    }
    let b = out.pop().expect("two checkpoints");
    let a = out.pop().expect("two checkpoints");
    Ok((a, b))
}
