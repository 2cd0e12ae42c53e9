//! Experiment configuration files.
//!
//! Configs are TOML documents; any key can be overridden from the command
//! line with a dotted path (`trainer.lr=1e-4`, `tversky.alpha=0.4`).
//!
//! ```toml
//! name = "unet-dsc"
//! loss = "dsc"            # dsc | jsc | tversky | bce
//! loss_epsilon = 1.0
//!
//! [tversky]
//! alpha = 0.3
//! beta = 0.7
//!
//! [arch]
//! name = "unet_vgg16"     # fcn8s | unet_vgg16 | fc_densenet | drn_c26
//! pretrained_encoder = true
//!
//! [trainer]
//! lr = 1e-5
//! epochs = 100
//! batch_size = 4
//! seed = 0
//! class_mode = "multi"    # multi | lungs | heart | clavicles
//! train_fold = 1
//!
//! [augment]
//! enabled = true
//! scale_range = [-0.1, 0.1]
//! translate_range = [-0.1, 0.1]
//! rotate_range_deg = [-10.0, 10.0]
//!
//! [weights]
//! path = "weights/vgg16.safetensors"
//! sha256 = "..."
//!
//! [postproc]
//! threshold = 0.25
//! min_area_fraction = 0.005
//! hole_fill = true
//!
//! [data]
//! root = "data/jsrt"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassMode, TrainConfig};
use crate::archzoo::{ArchSpec, PretrainedWeights};
use crate::dataset::AugmentParams;
use crate::error::{Error, Result};
use crate::losses::{LossKind, LossSpec, DEFAULT_EPSILON, DEFAULT_TVERSKY_ALPHA, DEFAULT_TVERSKY_BETA};
use crate::postproc::PostprocParams;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: String,
    #[serde(default = "default_loss")]
    loss: LossKind,
    #[serde(default = "default_eps")]
    loss_epsilon: f64,
    #[serde(default)]
    tversky: TverskySection,
    arch: ArchSpec,
    #[serde(default)]
    trainer: TrainerSection,
    #[serde(default)]
    augment: AugmentSection,
    #[serde(default)]
    weights: Option<PretrainedWeights>,
    #[serde(default)]
    postproc: PostprocParams,
    #[serde(default)]
    data: DataSection,
}

fn default_loss() -> LossKind {
    LossKind::Dsc
}

fn default_eps() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TverskySection {
    alpha: f64,
    beta: f64,
}

impl Default for TverskySection {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_TVERSKY_ALPHA,
            beta: DEFAULT_TVERSKY_BETA,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainerSection {
    lr: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    class_mode: ClassMode,
    train_fold: u8,
}

impl Default for TrainerSection {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            epochs: 100,
            batch_size: 4,
            seed: 0,
            class_mode: ClassMode::Multi,
            train_fold: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AugmentSection {
    enabled: bool,
    scale_range: (f64, f64),
    translate_range: (f64, f64),
    rotate_range_deg: (f64, f64),
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentParams::default();
        Self {
            enabled: true,
            scale_range: d.scale_range,
            translate_range: d.translate_range,
            rotate_range_deg: d.rotate_range_deg,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    #[serde(default)]
    root: Option<PathBuf>,
}

/// A parsed experiment: training settings plus evaluation and data options.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub postproc: PostprocParams,
    pub data_root: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config(format!("config syntax: {e}")))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        let file: ConfigFile = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let cfg = Self::from_file(file);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    fn from_file(f: ConfigFile) -> Self {
        let loss = LossSpec {
            kind: f.loss,
            alpha: f.tversky.alpha,
            beta: f.tversky.beta,
            epsilon: f.loss_epsilon,
        };
        let augment = f.augment.enabled.then(|| AugmentParams {
            scale_range: f.augment.scale_range,
            translate_range: f.augment.translate_range,
            rotate_range_deg: f.augment.rotate_range_deg,
            seed: f.trainer.seed,
        });
        let train = TrainConfig {
            name: f.name,
            arch: f.arch,
            loss,
            class_mode: f.trainer.class_mode,
            lr: f.trainer.lr,
            epochs: f.trainer.epochs,
            batch_size: f.trainer.batch_size,
            seed: f.trainer.seed,
            augment,
            train_fold: f.trainer.train_fold,
            weights: f.weights,
        };
        Self {
            train,
            postproc: f.postproc,
            data_root: f.data.root,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.postproc.validate()
    }

    /// Render back to TOML (used to record the resolved config of a run).
    pub fn to_toml_string(&self) -> String {
        let t = &self.train;
        let file = ConfigFile {
            name: t.name.clone(),
            loss: t.loss.kind,
            loss_epsilon: t.loss.epsilon,
            tversky: TverskySection {
                alpha: t.loss.alpha,
                beta: t.loss.beta,
            },
            arch: t.arch.clone(),
            trainer: TrainerSection {
                lr: t.lr,
                epochs: t.epochs,
                batch_size: t.batch_size,
                seed: t.seed,
                class_mode: t.class_mode,
                train_fold: t.train_fold,
            },
            augment: match &t.augment {
                Some(a) => AugmentSection {
                    enabled: true,
                    scale_range: a.scale_range,
                    translate_range: a.translate_range,
                    rotate_range_deg: a.rotate_range_deg,
                },
                None => AugmentSection {
                    enabled: false,
                    ..AugmentSection::default()
                },
            },
            weights: t.weights.clone(),
            postproc: self.postproc.clone(),
            data: DataSection {
                root: self.data_root.clone(),
            },
        };
        toml::to_string_pretty(&file).expect("config serializes")
    }
}

/// Set `key` (dotted path) to `raw`, parsed as a TOML value when possible and
/// as a string otherwise.
pub fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("override `{key}` does not address a table entry")))?;
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Split `key=value` into its parts.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archzoo::ArchName;
    use crate::structure::Structure;

    const MINIMAL: &str = r#"
name = "unet-dsc"
[arch]
name = "unet_vgg16"
"#;

    #[test]
    fn defaults_follow_training_recipe() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.train.lr, 1e-5);
        assert_eq!(c.train.epochs, 100);
        assert_eq!(c.train.batch_size, 4);
        assert_eq!(c.train.loss.kind, LossKind::Dsc);
        assert_eq!(c.train.loss.alpha, 0.3);
        assert_eq!(c.train.loss.beta, 0.7);
        assert_eq!(c.train.arch.name, ArchName::UnetVgg16);
        assert_eq!(c.postproc.threshold, 0.25);
        assert!(c.train.augment.is_some());
    }

    #[test]
    fn dotted_overrides() {
        let ov = vec![
            parse_override("trainer.lr=1e-4").unwrap(),
            parse_override("loss=tversky").unwrap(),
            parse_override("tversky.alpha=0.4").unwrap(),
            parse_override("trainer.class_mode=heart").unwrap(),
            parse_override("arch.num_classes=1").unwrap(),
            parse_override("data.root=/tmp/x").unwrap(),
        ];
        let c = ExperimentConfig::from_toml_str(MINIMAL, &ov).unwrap();
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.train.loss.kind, LossKind::Tversky);
        assert_eq!(c.train.loss.alpha, 0.4);
        assert_eq!(c.train.class_mode, ClassMode::Single(Structure::Heart));
        assert_eq!(c.data_root.as_deref(), Some(Path::new("/tmp/x")));
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in ["trainer.epochs=0", "trainer.lr=0", "trainer.batch_size=0", "bogus=1"] {
            let ov = vec![parse_override(bad).unwrap()];
            assert!(ExperimentConfig::from_toml_str(MINIMAL, &ov).is_err(), "{bad}");
        }
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, &[]).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(c, again);
    }
}
