//! Thin/thick vessel stratification and per-stratum scoring.
//!
//! Vessel thickness at a skeleton pixel is `2 * (d - 0.5)`, where `d` is the
//! distance from the pixel center to the nearest background pixel center
//! (i.e. twice the distance to the region boundary). Every vessel pixel takes
//! the thickness of its nearest skeleton pixel.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{validate_shapes, Grid, Mask, RealMap};
use crate::metrics::edt::{distance_to_background, distance_to_sites};
use crate::metrics::pixel::Confusion;
use crate::metrics::skeleton::skeletonize;
use crate::metrics::topology::{buffer_match, topo_metrics, MatchReport};
use crate::metrics::Flag;

pub const DEFAULT_THICKNESS_THRESHOLD: f64 = 7.0;
pub const DEFAULT_THIN_RANGE: f64 = 5.0;
pub const DEFAULT_THICK_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessSplit {
    pub thin: Mask,
    pub thick: Mask,
    pub threshold: f64,
}

impl ThicknessSplit {
    pub fn vessels(&self) -> Mask {
        self.thin.or(&self.thick).expect("strata share a shape")
    }
}

/// Per-pixel thickness estimate, 0 outside the mask.
pub fn estimate_thickness(gt: &Mask) -> RealMap {
    let shape = gt.shape();
    let skeleton = skeletonize(gt);
    let inner = distance_to_background(gt);
    let nearest = distance_to_sites(&skeleton);
    let data = (0..shape.len())
        .map(|i| {
            let (r, c) = (i / shape.width, i % shape.width);
            if !gt.get(r, c) {
                return 0.0;
            }
            match nearest.nearest(r, c) {
                Some((sr, sc)) => 2.0 * (inner[shape.index(sr, sc)] - 0.5),
                None => 0.0,
            }
        })
        .collect();
    RealMap::from_raw(shape, data)
}

/// Splits vessel pixels at `threshold`: thickness below it is thin.
pub fn split_thin_thick(gt: &Mask, threshold: f64) -> ThicknessSplit {
    split_by_thickness(gt, &estimate_thickness(gt), threshold).expect("thickness map derived from gt")
}

/// Same split, but from a known thickness map (e.g. a synthetic generator's).
pub fn split_by_thickness(gt: &Mask, thickness: &RealMap, threshold: f64) -> Result<ThicknessSplit> {
    validate_shapes(gt, thickness)?;
    let (w, h) = (gt.width(), gt.height());
    let thin = Mask::from_fn(w, h, |r, c| gt.get(r, c) && thickness.get(r, c) < threshold);
    let thick = Mask::from_fn(w, h, |r, c| gt.get(r, c) && thickness.get(r, c) >= threshold);
    Ok(ThicknessSplit { thin, thick, threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumRanges {
    pub thin: f64,
    pub thick: f64,
}

impl Default for StratumRanges {
    fn default() -> Self {
        Self {
            thin: DEFAULT_THIN_RANGE,
            thick: DEFAULT_THICK_RANGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumMetrics {
    pub f1: f64,
    pub correctness: f64,
    pub completeness: f64,
    pub quality: f64,
    pub range: f64,
    pub confusion: Confusion,
    pub matching: MatchReport,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedMetrics {
    pub thin: StratumMetrics,
    pub thick: StratumMetrics,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stratum {
    Thin,
    Thick,
}

/// Assigns every set pixel of `pred` to the stratum of its nearest vessel
/// pixel, provided it lies within that stratum's search range.
fn assign(pred: &Mask, split: &ThicknessSplit, vessels: &Mask, ranges: &StratumRanges) -> (Mask, Mask) {
    let field = distance_to_sites(vessels);
    let (w, h) = (pred.width(), pred.height());
    let mut thin = vec![0u8; w * h];
    let mut thick = vec![0u8; w * h];
    for (r, c) in pred.iter_set() {
        let Some((nr, nc)) = field.nearest(r, c) else {
            continue;
        };
        let stratum = if split.thin.get(nr, nc) {
            Stratum::Thin
        } else {
            Stratum::Thick
        };
        let range = match stratum {
            Stratum::Thin => ranges.thin,
            Stratum::Thick => ranges.thick,
        };
        if field.squared(r, c) <= range * range {
            match stratum {
                Stratum::Thin => thin[r * w + c] = 1,
                Stratum::Thick => thick[r * w + c] = 1,
            }
        }
    }
    (
        Mask::new(w, h, thin).expect("binary"),
        Mask::new(w, h, thick).expect("binary"),
    )
}

fn stratum_metrics(
    pred: &Mask,
    gt: &Mask,
    extracted_skel: &Mask,
    reference_skel: &Mask,
    range: f64,
) -> Result<StratumMetrics> {
    let confusion = Confusion::from_masks(pred, gt)?;
    let matching = buffer_match(extracted_skel, reference_skel, range)?;
    if gt.is_empty() {
        return Ok(StratumMetrics {
            f1: 0.0,
            correctness: 0.0,
            completeness: 0.0,
            quality: 0.0,
            range,
            confusion,
            matching,
            flags: vec![Flag::EmptyStratum],
        });
    }
    let pixel = confusion.metrics();
    let topo = topo_metrics(&matching);
    let mut flags = pixel.flags;
    flags.extend(topo.flags);
    Ok(StratumMetrics {
        f1: pixel.f1,
        correctness: topo.correctness,
        completeness: topo.completeness,
        quality: topo.quality,
        range,
        confusion,
        matching,
        flags,
    })
}

/// Per-stratum F1 and topology scores. Prediction pixels take part in a
/// stratum when they fall within its search range; the range also serves as
/// the buffer width for centerline matching.
pub fn stratified_metrics(pred: &Mask, split: &ThicknessSplit, ranges: &StratumRanges) -> Result<StratifiedMetrics> {
    validate_shapes(pred, &split.thin)?;
    validate_shapes(&split.thin, &split.thick)?;
    for r in [ranges.thin, ranges.thick] {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "search range must be finite and >= 0, got {r}"
            )));
        }
    }
    let vessels = split.vessels();
    let (pred_thin, pred_thick) = assign(pred, split, &vessels, ranges);
    let (skel_thin, skel_thick) = assign(&skeletonize(pred), split, &vessels, ranges);
    let reference = skeletonize(&vessels);
    let ref_thin = reference.and(&split.thin)?;
    let ref_thick = reference.and(&split.thick)?;
    Ok(StratifiedMetrics {
        thin: stratum_metrics(&pred_thin, &split.thin, &skel_thin, &ref_thin, ranges.thin)?,
        thick: stratum_metrics(&pred_thick, &split.thick, &skel_thick, &ref_thick, ranges.thick)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(width: usize) -> Mask {
        Mask::from_fn(60, 40, |r, c| {
            (20 - width / 2..20 - width / 2 + width).contains(&r) && (5..55).contains(&c)
        })
    }

    #[test]
    fn three_wide_bar_is_thin() {
        let s = split_thin_thick(&bar(3), 7.0);
        assert_eq!(s.thin, bar(3));
        assert!(s.thick.is_empty());
    }

    #[test]
    fn eleven_wide_bar_is_thick() {
        let t = estimate_thickness(&bar(11));
        assert_eq!(t.get(20, 30), 11.0);
        let s = split_thin_thick(&bar(11), 7.0);
        assert_eq!(s.thick, bar(11));
        assert!(s.thin.is_empty());
    }

    fn two_bars() -> (Mask, Mask, Mask) {
        let thin = Mask::from_fn(80, 60, |r, c| (10..13).contains(&r) && (5..75).contains(&c));
        let thick = Mask::from_fn(80, 60, |r, c| (35..46).contains(&r) && (5..75).contains(&c));
        let gt = thin.or(&thick).unwrap();
        (gt, thin, thick)
    }

    #[test]
    fn partition_covers_gt() {
        let (gt, thin, thick) = two_bars();
        let s = split_thin_thick(&gt, 7.0);
        assert_eq!(s.thin, thin);
        assert_eq!(s.thick, thick);
        assert_eq!(s.vessels(), gt);
        assert!(s.thin.and(&s.thick).unwrap().is_empty());
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let (gt, _, _) = two_bars();
        let s = split_thin_thick(&gt, 7.0);
        let m = stratified_metrics(&gt, &s, &StratumRanges::default()).unwrap();
        for st in [&m.thin, &m.thick] {
            assert_eq!(
                (st.f1, st.correctness, st.completeness, st.quality),
                (1.0, 1.0, 1.0, 1.0)
            );
        }
    }

    #[test]
    fn missing_thin_vessels() {
        let (gt, _, thick) = two_bars();
        let s = split_thin_thick(&gt, 7.0);
        let full = stratified_metrics(&gt, &s, &StratumRanges::default()).unwrap();
        let m = stratified_metrics(&thick, &s, &StratumRanges::default()).unwrap();
        assert_eq!(m.thin.completeness, 0.0);
        assert_eq!(m.thick, full.thick);
    }

    #[test]
    fn empty_stratum_flagged() {
        let s = split_thin_thick(&bar(3), 7.0);
        let m = stratified_metrics(&bar(3), &s, &StratumRanges::default()).unwrap();
        assert_eq!(m.thick.flags, vec![Flag::EmptyStratum]);
        assert_eq!(m.thick.f1, 0.0);
        assert_eq!(m.thin.f1, 1.0);
    }
}
