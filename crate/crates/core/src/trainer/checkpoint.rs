use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::archzoo::{ArchSpec, SegmentationModel};
use crate::error::{Error, Result};

pub const PARAMS_FILE: &str = "model.safetensors";
pub const META_FILE: &str = "checkpoint.json";
pub const LOG_FILE: &str = "train_log.csv";

/// Everything about a trained model except its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: TrainConfig,
    /// Epochs completed; equals `loss_history.len()`.
    pub epoch: usize,
    pub loss_history: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub train_case_ids: Vec<String>,
}

impl CheckpointMeta {
    pub fn arch(&self) -> &ArchSpec {
        &self.config.arch
    }

    pub fn train_fold(&self) -> u8 {
        self.config.train_fold
    }

    /// `epoch,mean_loss,wall_time_s` rows.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,wall_time_s\n");
        for (i, (l, t)) in self.loss_history.iter().zip(&self.epoch_seconds).enumerate() {
            let _ = writeln!(out, "{},{l:.9},{t:.3}", i + 1);
        }
        out
    }
}

pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: SegmentationModel,
}

impl Checkpoint {
    /// `runs/<name>/fold<k>` under `runs_root`.
    pub fn run_dir(runs_root: &Path, name: &str, fold: u8) -> PathBuf {
        runs_root.join(name).join(format!("fold{fold}"))
    }

    /// Write parameters, metadata and the training log into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.model.save(&dir.join(PARAMS_FILE))?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        let path = dir.join(META_FILE);
        std::fs::write(&path, meta).map_err(|e| Error::io(&path, e))?;
        let path = dir.join(LOG_FILE);
        std::fs::write(&path, self.meta.log_csv()).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(META_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: CheckpointMeta = serde_json::from_str(&text)?;
        if meta.epoch != meta.loss_history.len() {
            return Err(Error::Format {
                path,
                reason: format!(
                    "epoch {} but {} loss history entries",
                    meta.epoch,
                    meta.loss_history.len()
                ),
            });
        }
        let spec = ArchSpec {
            pretrained_encoder: false,
            ..meta.config.arch.clone()
        };
        let mut model = SegmentationModel::new(spec, meta.config.class_mode.class_set(), 0, None)?;
        model.load(&dir.join(PARAMS_FILE))?;
        Ok(Self { meta, model })
    }
}
