//! On-disk benchmark layout:
//!
//! ```text
//! <root>/images/<case_id>.IMG            raw JSRT radiographs
//! <root>/masks/<structure>/<case_id>.*   ground-truth rasters
//! <root>/folds.csv                       `case_id,fold` manifest
//! ```

use std::path::{Path, PathBuf};

use super::folds::make_fold_split_with;
use super::{load_masks, preprocess_to, read_jsrt_file, FoldSplit, Radiograph, SplitPolicy, TrainSample};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Corpus {
    root: PathBuf,
    pub invert: bool,
    pub policy: SplitPolicy,
}

impl Corpus {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["images", "masks"] {
            let dir = root.join(sub);
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "data directory {} not found (expected <root>/images, <root>/masks, <root>/folds.csv)",
                    dir.display()
                )));
            }
        }
        Ok(Self {
            root,
            invert: true,
            policy: SplitPolicy::Benchmark,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn image_path(&self, case_id: &str) -> PathBuf {
        self.root.join("images").join(format!("{case_id}.IMG"))
    }

    pub fn masks_dir(&self) -> PathBuf {
        self.root.join("masks")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("folds.csv")
    }

    /// Case ids of all radiographs, sorted.
    pub fn case_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join("images");
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut ids = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let is_img = path
                .extension()
                .map(|e| e.eq_ignore_ascii_case("img"))
                .unwrap_or(false);
            if is_img {
                if let Some(stem) = path.file_stem() {
                    ids.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn split(&self) -> Result<FoldSplit> {
        make_fold_split_with(&self.case_ids()?, &self.manifest_path(), self.policy)
    }

    pub fn radiograph(&self, case_id: &str) -> Result<Radiograph> {
        read_jsrt_file(&self.image_path(case_id), self.invert)
    }

    pub fn sample(&self, case_id: &str, size: usize) -> Result<TrainSample> {
        let r = self.radiograph(case_id)?;
        let input = preprocess_to(&r, size)?;
        let masks = load_masks(case_id, &self.masks_dir(), (size, size))?;
        Ok(TrainSample {
            case_id: case_id.to_string(),
            input,
            masks,
        })
    }

    pub fn samples(&self, case_ids: &[String], size: usize) -> Result<Vec<TrainSample>> {
        case_ids.iter().map(|id| self.sample(id, size)).collect()
    }
}
