//! Pixel-level and centerline (topology-level) segmentation metrics.

pub mod edt;
pub mod morphology;
pub mod pixel;
pub mod skeleton;
pub mod stratify;
pub mod topology;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{validate_shapes, Mask};

pub use pixel::{pixel_metrics, Confusion, PixelMetrics};
pub use skeleton::skeletonize;
pub use stratify::{
    split_by_thickness, split_thin_thick, stratified_metrics, StratifiedMetrics, StratumMetrics, StratumRanges,
    ThicknessSplit,
};
pub use topology::{buffer_match, quality, topo_metrics, MatchReport, TopoMetrics};

/// Buffer width used for DRIVE-style fundus data.
pub const THRESHOLD_FUNDUS: f64 = 1.0;
/// Buffer width used for angiography data (XCAD, PV, DSA).
pub const THRESHOLD_ANGIO: f64 = 2.0;

/// Marks a metric whose denominator was zero; the metric is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    PrecisionUndefined,
    RecallUndefined,
    F1Undefined,
    CompletenessUndefined,
    CorrectnessUndefined,
    QualityUndefined,
    EmptyStratum,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::PrecisionUndefined => "precision_undefined",
            Flag::RecallUndefined => "recall_undefined",
            Flag::F1Undefined => "f1_undefined",
            Flag::CompletenessUndefined => "completeness_undefined",
            Flag::CorrectnessUndefined => "correctness_undefined",
            Flag::QualityUndefined => "quality_undefined",
            Flag::EmptyStratum => "empty_stratum",
        }
    }
}

pub(crate) fn ratio(num: u64, den: u64, flag: Flag, flags: &mut Vec<Flag>) -> f64 {
    if den == 0 {
        flags.push(flag);
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Everything measured for one prediction/ground-truth pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageEval {
    pub confusion: Confusion,
    pub pixel: PixelMetrics,
    pub matching: MatchReport,
    pub topo: TopoMetrics,
    pub stratified: Option<StratifiedMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub threshold: f64,
    pub stratify: Option<StratifyConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifyConfig {
    pub thickness_threshold: f64,
    pub ranges: StratumRanges,
}

impl Default for StratifyConfig {
    fn default() -> Self {
        Self {
            thickness_threshold: stratify::DEFAULT_THICKNESS_THRESHOLD,
            ranges: StratumRanges::default(),
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: THRESHOLD_ANGIO,
            stratify: None,
        }
    }
}

/// Pixel metrics on the masks plus buffer matching of their skeletons.
pub fn evaluate(pred: &Mask, gt: &Mask, cfg: &EvalConfig) -> Result<ImageEval> {
    validate_shapes(pred, gt)?;
    let confusion = Confusion::from_masks(pred, gt)?;
    let matching = buffer_match(&skeletonize(pred), &skeletonize(gt), cfg.threshold)?;
    let stratified = match &cfg.stratify {
        Some(s) => {
            let split = split_thin_thick(gt, s.thickness_threshold);
            Some(stratified_metrics(pred, &split, &s.ranges)?)
        }
        None => None,
    };
    Ok(ImageEval {
        confusion,
        pixel: confusion.metrics(),
        topo: topo_metrics(&matching),
        matching,
        stratified,
    })
}
