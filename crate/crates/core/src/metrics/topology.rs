//! Buffer matching between two centerlines and the derived
//! completeness / correctness / quality scores.
//!
//! Lengths are approximated by skeleton pixel counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{validate_shapes, Mask};
use crate::metrics::edt::distance_to_sites;
use crate::metrics::{ratio, Flag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchReport {
    /// Extracted skeleton pixels inside the reference buffer (TP for correctness).
    pub matched_extracted: u64,
    /// Extracted skeleton pixels outside it (FP).
    pub unmatched_extracted: u64,
    /// Reference skeleton pixels inside the extracted buffer (TP for completeness).
    pub matched_reference: u64,
    /// Reference skeleton pixels outside it (FN).
    pub unmatched_reference: u64,
    pub threshold: f64,
}

impl MatchReport {
    pub fn extracted_total(&self) -> u64 {
        self.matched_extracted + self.unmatched_extracted
    }

    pub fn reference_total(&self) -> u64 {
        self.matched_reference + self.unmatched_reference
    }

    /// Sums counts across images; thresholds must agree.
    pub fn merge(&self, other: &MatchReport) -> MatchReport {
        debug_assert_eq!(self.threshold, other.threshold);
        MatchReport {
            matched_extracted: self.matched_extracted + other.matched_extracted,
            unmatched_extracted: self.unmatched_extracted + other.unmatched_extracted,
            matched_reference: self.matched_reference + other.matched_reference,
            unmatched_reference: self.unmatched_reference + other.unmatched_reference,
            threshold: self.threshold,
        }
    }
}

fn count_within(from: &Mask, to: &Mask, threshold: f64) -> (u64, u64) {
    let field = distance_to_sites(to);
    let t2 = threshold * threshold;
    let mut matched = 0;
    let mut unmatched = 0;
    for (r, c) in from.iter_set() {
        if field.squared(r, c) <= t2 {
            matched += 1;
        } else {
            unmatched += 1;
        }
    }
    (matched, unmatched)
}

/// Counts pixels of each skeleton lying within `threshold` (Euclidean, `<=`)
/// of the other skeleton.
pub fn buffer_match(extracted: &Mask, reference: &Mask, threshold: f64) -> Result<MatchReport> {
    validate_shapes(extracted, reference)?;
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "buffer threshold must be finite and >= 0, got {threshold}"
        )));
    }
    let (matched_extracted, unmatched_extracted) = count_within(extracted, reference, threshold);
    let (matched_reference, unmatched_reference) = count_within(reference, extracted, threshold);
    Ok(MatchReport {
        matched_extracted,
        unmatched_extracted,
        matched_reference,
        unmatched_reference,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopoMetrics {
    pub completeness: f64,
    pub correctness: f64,
    pub quality: f64,
    pub flags: Vec<Flag>,
}

/// `c * r / (c - c * r + r)`; `None` when both are zero.
pub fn quality(completeness: f64, correctness: f64) -> Option<f64> {
    let den = completeness - completeness * correctness + correctness;
    (den > 0.0).then(|| completeness * correctness / den)
}

pub fn topo_metrics(report: &MatchReport) -> TopoMetrics {
    let mut flags = Vec::new();
    let completeness = ratio(
        report.matched_reference,
        report.reference_total(),
        Flag::CompletenessUndefined,
        &mut flags,
    );
    let correctness = ratio(
        report.matched_extracted,
        report.extracted_total(),
        Flag::CorrectnessUndefined,
        &mut flags,
    );
    let quality = quality(completeness, correctness).unwrap_or_else(|| {
        flags.push(Flag::QualityUndefined);
        0.0
    });
    TopoMetrics {
        completeness,
        correctness,
        quality,
        flags,
    }
}
