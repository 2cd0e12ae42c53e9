//! Benchmark execution: run a model on its held-out fold, score every case,
//! pool the scores, and render overlays and comparison tables.

pub mod overlay;
mod published;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use overlay::{overlay_classes, render_overlay, save_overlay, OverlayClass, BLUE, GREEN, RED};
pub use published::{published, MetricTriple, Published, PublishedRow, PublishedSota};
pub use report::{emit_report, Layout, Report, ReportRow};

use crate::dataset::{resample_nearest, MaskSet, ModelInput, TrainSample, JSRT_SIDE, JSRT_SPACING_MM};
use crate::error::{Error, Result};
use crate::metrics::{mm_scale, score_pair, MetricsRecord};
use crate::postproc::{self, PostprocParams};
use crate::structure::Structure;
use crate::trainer::Checkpoint;
use crate::archzoo::Segmenter;

/// One test case; `truth` may be missing or partial.
#[derive(Clone, Debug)]
pub struct EvalCase {
    pub case_id: String,
    pub input: ModelInput,
    pub truth: Option<MaskSet>,
}

impl From<TrainSample> for EvalCase {
    fn from(s: TrainSample) -> Self {
        Self {
            case_id: s.case_id,
            input: s.input,
            truth: Some(s.masks),
        }
    }
}

/// What a model was trained on, for the leakage guard.
#[derive(Clone, Copy, Debug)]
pub struct Provenance<'a> {
    pub train_fold: Option<u8>,
    pub train_case_ids: &'a [String],
}

impl<'a> Provenance<'a> {
    pub fn of(checkpoint: &'a Checkpoint) -> Self {
        Self {
            train_fold: Some(checkpoint.meta.train_fold()),
            train_case_ids: &checkpoint.meta.train_case_ids,
        }
    }

    /// A model with no recorded training data (used for oracle checks).
    pub fn none() -> Self {
        Self {
            train_fold: None,
            train_case_ids: &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub post: PostprocParams,
    /// Pixel spacing and side of the original radiographs; MACD is scaled by
    /// `spacing * side / truth_side`.
    pub native_spacing_mm: f64,
    pub native_side: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            post: PostprocParams::default(),
            native_spacing_mm: JSRT_SPACING_MM,
            native_side: JSRT_SIDE,
        }
    }
}

/// Post-processed prediction and scores for one case.
#[derive(Clone, Debug)]
pub struct CaseResult {
    pub case_id: String,
    pub prediction: MaskSet,
    pub records: Vec<MetricsRecord>,
}

/// Reject evaluation on data the model was trained on.
pub fn guard_fold(provenance: &Provenance, test_fold: Option<u8>, case_ids: &[&str]) -> Result<()> {
    if let (Some(a), Some(b)) = (provenance.train_fold, test_fold) {
        if a == b {
            return Err(Error::FoldLeakage(format!("model trained on fold {a} evaluated on fold {b}")));
        }
    }
    crate::trainer::check_disjoint(
        provenance.train_case_ids.iter().map(String::as_str),
        case_ids.iter().copied(),
    )
}

/// Predict, post-process and score every case.
///
/// Scores are computed at the resolution of each case's ground truth; a
/// prediction at a different resolution is resampled (nearest neighbour)
/// first. Cases or structures without ground truth are skipped with a
/// warning.
pub fn evaluate_cases(
    model: &dyn Segmenter,
    provenance: &Provenance,
    test_fold: Option<u8>,
    cases: &[EvalCase],
    opts: &EvalOptions,
) -> Result<Vec<CaseResult>> {
    opts.post.validate()?;
    let ids: Vec<&str> = cases.iter().map(|c| c.case_id.as_str()).collect();
    guard_fold(provenance, test_fold, &ids)?;
    let mut out = Vec::with_capacity(cases.len());
    for case in cases {
        let scores = model.predict(&case.input)?;
        let prediction = postproc::apply(&scores, &opts.post)?;
        let Some(truth) = &case.truth else {
            log::warn!("case {}: no ground truth, skipped", case.case_id);
            continue;
        };
        let (th, tw) = truth.resolution();
        let mm = mm_scale(opts.native_spacing_mm, opts.native_side, th);
        let mut records = Vec::with_capacity(model.classes().len());
        for &s in model.classes() {
            let Some(gt) = truth.get(s) else {
                log::warn!("case {}: no {s} ground truth, skipped", case.case_id);
                continue;
            };
            let pred = prediction.get(s).expect("prediction has every model class");
            let pred = if pred.shape() == (th, tw) {
                pred.clone()
            } else {
                resample_nearest(pred, th, tw)
            };
            records.push(score_pair(&case.case_id, s, &pred, gt, mm)?);
        }
        out.push(CaseResult {
            case_id: case.case_id.clone(),
            prediction,
            records,
        });
    }
    Ok(out)
}

/// Score a checkpoint on its held-out fold.
pub fn evaluate(
    checkpoint: &Checkpoint,
    test_fold: u8,
    cases: &[EvalCase],
    post: &PostprocParams,
) -> Result<Vec<MetricsRecord>> {
    let opts = EvalOptions {
        post: post.clone(),
        ..EvalOptions::default()
    };
    let results = evaluate_cases(
        &checkpoint.model,
        &Provenance::of(checkpoint),
        Some(test_fold),
        cases,
        &opts,
    )?;
    Ok(results.into_iter().flat_map(|r| r.records).collect())
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.max(0.0).sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureStats {
    pub n_cases: usize,
    pub dice: Stat,
    pub jaccard: Stat,
    /// `None` when MACD is undefined for every case.
    pub macd_mm: Option<Stat>,
    pub macd_undefined: usize,
}

/// Per-structure statistics pooled over all evaluated cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_cases: usize,
    pub structures: BTreeMap<Structure, StructureStats>,
}

/// Pool records (both folds together) per structure.
pub fn aggregate(records: &[MetricsRecord]) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(Error::Empty("no metrics records to aggregate".into()));
    }
    let mut sorted: Vec<&MetricsRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (a.structure, &a.case_id).cmp(&(b.structure, &b.case_id)));
    let mut by: BTreeMap<Structure, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in sorted {
        by.entry(r.structure).or_default().push(r);
    }
    let structures = by
        .into_iter()
        .map(|(s, rs)| {
            let dice: Vec<f64> = rs.iter().map(|r| r.dice).collect();
            let jac: Vec<f64> = rs.iter().map(|r| r.jaccard).collect();
            let macd: Vec<f64> = rs.iter().filter_map(|r| r.macd_mm).collect();
            let stats = StructureStats {
                n_cases: rs.len(),
                dice: Stat::of(&dice).expect("nonempty"),
                jaccard: Stat::of(&jac).expect("nonempty"),
                macd_mm: Stat::of(&macd),
                macd_undefined: rs.len() - macd.len(),
            };
            (s, stats)
        })
        .collect();
    let n_cases = records.iter().map(|r| r.case_id.as_str()).collect::<BTreeSet<_>>().len();
    Ok(AggregateReport { n_cases, structures })
}
