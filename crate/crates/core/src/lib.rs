//! thoraxseg: segmentation of lung fields, heart and clavicles in chest radiographs.
//!
//! The crate is organized along the pipeline:
//!
//! 1. [`dataset`] – raw 12-bit radiograph decoding, mask ingestion, the two-fold
//!    benchmark split, resizing/normalization and geometric augmentation.
//! 2. [`archzoo`] – the four fully-convolutional networks (FCN-8s, U-Net with a
//!    VGG-16 encoder, FC-DenseNet, DRN-C-26) on top of `candle`.
//! 3. [`losses`] – soft Dice, Jaccard, Tversky and binary cross-entropy
//!    objectives with analytic gradients, summed over classes.
//! 4. [`trainer`] – Adam optimization, checkpoints and the two-fold protocol.
//! 5. [`postproc`] – thresholding, small-object removal and hole filling.
//! 6. [`metrics`] – Dice, Jaccard and mean absolute contour distance.
//! 7. [`evalbench`] – per-case evaluation, aggregation, overlays and reports.
//!
//! [`verify`] bundles the self-check suites used by the `verify` command.

pub mod archzoo;
pub mod dataset;
pub mod error;
pub mod evalbench;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod postproc;
pub mod structure;
pub mod trainer;
pub mod verify;

pub use archzoo::{ArchName, ArchSpec, SegmentationModel, Segmenter};
pub use dataset::{MaskSet, ModelInput, Radiograph, TrainSample};
pub use error::{Error, Result};
pub use grid::{Grid, Mask};
pub use losses::{ClassSet, LossKind, LossSpec};
pub use metrics::MetricsRecord;
pub use postproc::PostprocParams;
pub use structure::{ScoreMaps, Structure};
pub use trainer::{Checkpoint, TrainConfig};

