//! Overlap and cross-entropy objectives on soft score maps.
//!
//! For a score map `S` (values in `[0, 1]`) and binary ground truth `G` of
//! one class, set cardinalities are relaxed to sums over pixels:
//!
//! ```text
//! |SG| = Σ s·g     |S| = Σ s     |G| = Σ g
//! |S\G| = Σ s·(1-g)              |G\S| = Σ (1-s)·g
//! ```
//!
//! Every loss comes with its analytic gradient with respect to `S`, which is
//! what the trainer back-propagates through the network. The multi-class
//! objective is the plain (unweighted) sum of the per-class losses.

use serde::{Deserialize, Serialize};

use crate::dataset::MaskSet;
use crate::error::{Error, Result};
use crate::structure::{ScoreMaps, Structure};

/// Clamp applied to scores before taking logarithms in BCE.
pub const BCE_CLAMP: f64 = 1e-7;
pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_TVERSKY_ALPHA: f64 = 0.3;
pub const DEFAULT_TVERSKY_BETA: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Dsc,
    Jsc,
    Tversky,
    Bce,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Dsc, LossKind::Jsc, LossKind::Tversky, LossKind::Bce];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Dsc => "dsc",
            LossKind::Jsc => "jsc",
            LossKind::Tversky => "tversky",
            LossKind::Bce => "bce",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dsc" | "dice" => Ok(LossKind::Dsc),
            "jsc" | "jaccard" => Ok(LossKind::Jsc),
            "tversky" => Ok(LossKind::Tversky),
            "bce" => Ok(LossKind::Bce),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// False-positive weight (Tversky only).
    pub alpha: f64,
    /// False-negative weight (Tversky only).
    pub beta: f64,
    /// Smoothing added to numerator and denominator of overlap losses.
    pub epsilon: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            alpha: DEFAULT_TVERSKY_ALPHA,
            beta: DEFAULT_TVERSKY_BETA,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.kind == LossKind::Tversky {
            for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Config(format!("tversky.{name} must lie in (0, 1), got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn loss(&self, s: &[f64], g: &[f64]) -> Result<f64> {
        match self.kind {
            LossKind::Dsc => dsc_loss(s, g, self.epsilon),
            LossKind::Jsc => jsc_loss(s, g, self.epsilon),
            LossKind::Tversky => tversky_loss(s, g, self.alpha, self.beta, self.epsilon),
            LossKind::Bce => bce_loss(s, g),
        }
    }

    /// Loss value and its gradient with respect to `s`.
    pub fn loss_and_grad(&self, s: &[f64], g: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.kind {
            LossKind::Dsc => dsc_loss_grad(s, g, self.epsilon),
            LossKind::Jsc => jsc_loss_grad(s, g, self.epsilon),
            LossKind::Tversky => tversky_loss_grad(s, g, self.alpha, self.beta, self.epsilon),
            LossKind::Bce => bce_loss_grad(s, g),
        }
    }
}

/// Ordered, duplicate-free list of the classes a model predicts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    classes: Vec<Structure>,
}

impl ClassSet {
    pub fn new(classes: Vec<Structure>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Config("class set is empty".into()));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::Config(format!("class {c} listed twice")));
            }
        }
        Ok(Self { classes })
    }

    pub fn all() -> Self {
        Self {
            classes: Structure::ALL.to_vec(),
        }
    }

    pub fn single(s: Structure) -> Self {
        Self { classes: vec![s] }
    }

    pub fn classes(&self) -> &[Structure] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct SoftCounts {
    inter: f64,
    s_sum: f64,
    g_sum: f64,
}

fn counts(s: &[f64], g: &[f64]) -> Result<SoftCounts> {
    if s.len() != g.len() {
        return Err(Error::Contract(format!(
            "score map has {} pixels, ground truth {}",
            s.len(),
            g.len()
        )));
    }
    if s.is_empty() {
        return Err(Error::Contract("empty score map".into()));
    }
    let mut c = SoftCounts::default();
    for (&si, &gi) in s.iter().zip(g) {
        c.inter += si * gi;
        c.s_sum += si;
        c.g_sum += gi;
    }
    Ok(c)
}

/// `1 - (2|SG| + eps) / (|S| + |G| + eps)`
pub fn dsc_loss(s: &[f64], g: &[f64], eps: f64) -> Result<f64> {
    let c = counts(s, g)?;
    Ok(1.0 - (2.0 * c.inter + eps) / (c.s_sum + c.g_sum + eps))
}

pub fn dsc_loss_grad(s: &[f64], g: &[f64], eps: f64) -> Result<(f64, Vec<f64>)> {
    let c = counts(s, g)?;
    let num = 2.0 * c.inter + eps;
    let den = c.s_sum + c.g_sum + eps;
    let q = num / (den * den);
    let grad = g.iter().map(|&gi| -(2.0 * gi / den - q)).collect();
    Ok((1.0 - num / den, grad))
}

/// `1 - (|SG| + eps) / (|S| + |G| - |SG| + eps)`
pub fn jsc_loss(s: &[f64], g: &[f64], eps: f64) -> Result<f64> {
    let c = counts(s, g)?;
    Ok(1.0 - (c.inter + eps) / (c.s_sum + c.g_sum - c.inter + eps))
}

pub fn jsc_loss_grad(s: &[f64], g: &[f64], eps: f64) -> Result<(f64, Vec<f64>)> {
    let c = counts(s, g)?;
    let num = c.inter + eps;
    let den = c.s_sum + c.g_sum - c.inter + eps;
    let den2 = den * den;
    let grad = g
        .iter()
        .map(|&gi| -(gi * den - num * (1.0 - gi)) / den2)
        .collect();
    Ok((1.0 - num / den, grad))
}

/// `1 - (|SG| + eps) / (|SG| + alpha|S\G| + beta|G\S| + eps)`
pub fn tversky_loss(s: &[f64], g: &[f64], alpha: f64, beta: f64, eps: f64) -> Result<f64> {
    let c = counts(s, g)?;
    let fp = c.s_sum - c.inter;
    let fn_ = c.g_sum - c.inter;
    Ok(1.0 - (c.inter + eps) / (c.inter + alpha * fp + beta * fn_ + eps))
}

pub fn tversky_loss_grad(
    s: &[f64],
    g: &[f64],
    alpha: f64,
    beta: f64,
    eps: f64,
) -> Result<(f64, Vec<f64>)> {
    let c = counts(s, g)?;
    let fp = c.s_sum - c.inter;
    let fn_ = c.g_sum - c.inter;
    let num = c.inter + eps;
    let den = c.inter + alpha * fp + beta * fn_ + eps;
    let den2 = den * den;
    let grad = g
        .iter()
        .map(|&gi| {
            let dden = gi + alpha * (1.0 - gi) - beta * gi;
            -(gi * den - num * dden) / den2
        })
        .collect();
    Ok((1.0 - num / den, grad))
}

/// Mean binary cross-entropy, `-(1/N) Σ [g log s + (1-g) log(1-s)]`, with
/// scores clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(s: &[f64], g: &[f64]) -> Result<f64> {
    counts(s, g)?;
    let n = s.len() as f64;
    let sum: f64 = s
        .iter()
        .zip(g)
        .map(|(&si, &gi)| {
            let sc = si.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            gi * sc.ln() + (1.0 - gi) * (1.0 - sc).ln()
        })
        .sum();
    Ok(-sum / n)
}

pub fn bce_loss_grad(s: &[f64], g: &[f64]) -> Result<(f64, Vec<f64>)> {
    let value = bce_loss(s, g)?;
    let n = s.len() as f64;
    let grad = s
        .iter()
        .zip(g)
        .map(|(&si, &gi)| {
            if si < BCE_CLAMP || si > 1.0 - BCE_CLAMP {
                0.0
            } else {
                -(gi / si - (1.0 - gi) / (1.0 - si)) / n
            }
        })
        .collect();
    Ok((value, grad))
}

/// Soft Dice coefficient `2|SG| / (|S| + |G|)`, with `eps` smoothing.
pub fn soft_dice(s: &[f64], g: &[f64], eps: f64) -> Result<f64> {
    Ok(1.0 - dsc_loss(s, g, eps)?)
}

/// Sum of per-class losses over `classes`.
pub fn total_loss(scores: &ScoreMaps, truth: &MaskSet, spec: &LossSpec, classes: &ClassSet) -> Result<f64> {
    if scores.classes() != classes.classes() {
        return Err(Error::Contract(format!(
            "score maps cover {:?}, class set is {:?}",
            scores.classes(),
            classes.classes()
        )));
    }
    let mut total = 0.0;
    for &c in classes.classes() {
        let s = scores.get(c).expect("checked above");
        let g = truth
            .get(c)
            .ok_or_else(|| Error::Contract(format!("ground truth lacks {c}")))?;
        if s.shape() != g.shape() {
            return Err(Error::Contract(format!(
                "{c}: score map {:?} vs ground truth {:?}",
                s.shape(),
                g.shape()
            )));
        }
        let sv: Vec<f64> = s.as_slice().iter().map(|&v| v as f64).collect();
        let gv: Vec<f64> = g.as_slice().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        total += spec.loss(&sv, &gv)?;
    }
    Ok(total)
}
