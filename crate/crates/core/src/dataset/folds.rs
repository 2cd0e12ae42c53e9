//! The two-fold benchmark split.
//!
//! The manifest is plain text with one `case_id,fold_number` pair per line;
//! blank lines and lines starting with `#` are ignored. The split is always
//! taken from the manifest, never drawn at random.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

pub const FOLD1_SIZE: usize = 124;
pub const FOLD2_SIZE: usize = 123;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitPolicy {
    /// Enforce the benchmark fold sizes (124 / 123).
    Benchmark,
    /// Only require a partition into two nonempty folds (fixtures, subsets).
    AnySize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold1: Vec<String>,
    pub fold2: Vec<String>,
}

impl FoldSplit {
    /// Case ids of fold `k` (1 or 2).
    pub fn fold(&self, k: u8) -> Result<&[String]> {
        match k {
            1 => Ok(&self.fold1),
            2 => Ok(&self.fold2),
            _ => Err(Error::Config(format!("fold must be 1 or 2, got {k}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.fold1.len() + self.fold2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_ids(&self) -> impl Iterator<Item = &String> {
        self.fold1.iter().chain(self.fold2.iter())
    }

    /// Check the partition invariants against the full id list.
    pub fn validate(&self, case_ids: &[String], policy: SplitPolicy) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.all_ids() {
            if !seen.insert(id.as_str()) {
                return Err(Error::SplitIntegrity(format!("case {id} listed more than once")));
            }
        }
        let expected: BTreeSet<&str> = case_ids.iter().map(String::as_str).collect();
        if expected.len() != case_ids.len() {
            return Err(Error::SplitIntegrity("duplicate ids in the case list".into()));
        }
        if let Some(missing) = expected.difference(&seen).next() {
            return Err(Error::SplitIntegrity(format!(
                "case {missing} is not assigned to a fold ({} of {} assigned)",
                seen.len(),
                expected.len()
            )));
        }
        if let Some(extra) = seen.difference(&expected).next() {
            return Err(Error::SplitIntegrity(format!("manifest lists unknown case {extra}")));
        }
        match policy {
            SplitPolicy::Benchmark => {
                if self.fold1.len() != FOLD1_SIZE || self.fold2.len() != FOLD2_SIZE {
                    return Err(Error::SplitIntegrity(format!(
                        "fold sizes {}/{} differ from {FOLD1_SIZE}/{FOLD2_SIZE}",
                        self.fold1.len(),
                        self.fold2.len()
                    )));
                }
            }
            SplitPolicy::AnySize => {
                if self.fold1.is_empty() || self.fold2.is_empty() {
                    return Err(Error::SplitIntegrity("a fold is empty".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parse manifest text into a split without checking it against a case list.
pub fn parse_manifest(text: &str) -> Result<FoldSplit> {
    let mut split = FoldSplit {
        fold1: Vec::new(),
        fold2: Vec::new(),
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, fold) = line.split_once(',').ok_or_else(|| {
            Error::SplitIntegrity(format!("line {}: expected `case_id,fold`", lineno + 1))
        })?;
        let id = id.trim().to_string();
        match fold.trim() {
            "1" => split.fold1.push(id),
            "2" => split.fold2.push(id),
            other => {
                return Err(Error::SplitIntegrity(format!(
                    "line {}: fold `{other}` is not 1 or 2",
                    lineno + 1
                )))
            }
        }
    }
    Ok(split)
}

/// Read the fold manifest and check it covers exactly `case_ids` with the
/// benchmark fold sizes.
pub fn make_fold_split(case_ids: &[String], manifest: &Path) -> Result<FoldSplit> {
    make_fold_split_with(case_ids, manifest, SplitPolicy::Benchmark)
}

pub(crate) fn make_fold_split_with(
    case_ids: &[String],
    manifest: &Path,
    policy: SplitPolicy,
) -> Result<FoldSplit> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let split = parse_manifest(&text)?;
    split.validate(case_ids, policy)?;
    Ok(split)
}
