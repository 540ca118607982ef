//! Supervised loss stack: affinity cosine distance (ACD), binary cross-entropy
//! on the segmentation map and on the affinity field, and their weighted sum.
//!
//! All reductions are means, accumulated sequentially in storage order so the
//! result is reproducible bit-for-bit.

use rand::Rng;
use serde::Serialize;

use crate::affinity::{compute_affinity, NeighborhoodSpec};
use crate::error::{Error, Result};
use crate::grid::{validate_shapes, AffinityField, Grid, Mask, ProbMap, Shape};
use crate::rng::rng_new;

pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_LAMBDA_B: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossConfig {
    /// Weight of the ACD term.
    pub lambda_b: f64,
    /// Probability clamp and zero-norm guard.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_b: DEFAULT_LAMBDA_B,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl LossConfig {
    pub fn new(lambda_b: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self { lambda_b, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_b.is_finite() && self.lambda_b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda_b must be finite and >= 0, got {}",
                self.lambda_b
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1e-6], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub bce_seg: f64,
    pub bce_aff: f64,
    pub acd: f64,
    pub lambda_b: f64,
    pub total: f64,
}

/// Partial derivatives of the total loss, laid out like the inputs' data.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLossGradient {
    pub seg: Vec<f64>,
    pub aff: Vec<f64>,
}

#[inline]
fn clamp_prob(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

fn bce_mean(pred: &[f64], truth: &[f64], eps: f64) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for (&p, &t) in pred.iter().zip(truth) {
        let p = clamp_prob(p, eps);
        sum -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    sum / pred.len() as f64
}

fn bce_grad_into(pred: &[f64], truth: &[f64], eps: f64, scale: f64, out: &mut [f64]) {
    let n = pred.len() as f64;
    for ((&p, &t), g) in pred.iter().zip(truth).zip(out.iter_mut()) {
        // the clamp is flat outside (eps, 1 - eps)
        *g += if p <= eps || p >= 1.0 - eps {
            0.0
        } else {
            scale * ((1.0 - t) / (1.0 - p) - t / p) / n
        };
    }
}

/// Per-pixel view over slot-major planes.
struct Planes<'a> {
    data: &'a [f64],
    pixels: usize,
    slots: usize,
}

impl Planes<'_> {
    #[inline]
    fn at(&self, slot: usize, pixel: usize) -> f64 {
        self.data[slot * self.pixels + pixel]
    }

    fn dot_norms(&self, other: &Planes<'_>, pixel: usize) -> (f64, f64, f64) {
        let (mut dot, mut yy, mut gg) = (0.0, 0.0, 0.0);
        for s in 0..self.slots {
            let y = self.at(s, pixel);
            let g = other.at(s, pixel);
            dot += y * g;
            yy += y * y;
            gg += g * g;
        }
        (dot, yy, gg)
    }
}

fn cosine(dot: f64, yy: f64, gg: f64, eps: f64) -> Option<f64> {
    if yy.sqrt() <= eps || gg.sqrt() <= eps {
        None
    } else {
        Some(dot / (yy * gg).sqrt())
    }
}

fn acd_mean(pred: &Planes<'_>, truth: &Planes<'_>, eps: f64) -> f64 {
    if pred.pixels == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for px in 0..pred.pixels {
        let (dot, yy, gg) = pred.dot_norms(truth, px);
        sum += cosine(dot, yy, gg, eps).unwrap_or(0.0);
    }
    1.0 - sum / pred.pixels as f64
}

fn acd_grad_into(pred: &Planes<'_>, truth: &Planes<'_>, eps: f64, scale: f64, out: &mut [f64]) {
    let n = pred.pixels as f64;
    for px in 0..pred.pixels {
        let (dot, yy, gg) = pred.dot_norms(truth, px);
        let Some(cos) = cosine(dot, yy, gg, eps) else {
            continue;
        };
        let norms = (yy * gg).sqrt();
        for s in 0..pred.slots {
            let y = pred.at(s, px);
            let g = truth.at(s, px);
            let dcos = g / norms - cos * y / yy;
            out[s * pred.pixels + px] -= scale * dcos / n;
        }
    }
}

fn planes(field: &AffinityField) -> Planes<'_> {
    Planes {
        data: field.data(),
        pixels: field.shape().len(),
        slots: field.slot_count(),
    }
}

/// One minus the mean per-pixel cosine similarity of affinity vectors.
/// Pixels where either vector is (near) zero contribute similarity 0.
pub fn acd_loss(pred: &AffinityField, truth: &AffinityField) -> Result<f64> {
    acd_loss_with(pred, truth, DEFAULT_EPSILON)
}

pub fn acd_loss_with(pred: &AffinityField, truth: &AffinityField, epsilon: f64) -> Result<f64> {
    pred.same_layout(truth)?;
    Ok(acd_mean(&planes(pred), &planes(truth), epsilon))
}

/// Mean binary cross-entropy over paired values, probabilities clamped to
/// `[epsilon, 1 - epsilon]`.
pub fn bce(pred: &[f64], truth: &[f64], epsilon: f64) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidValue(format!(
            "bce needs equal lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(bce_mean(pred, truth, epsilon))
}

pub fn bce_seg(pred: &ProbMap, truth: &Mask) -> Result<f64> {
    validate_shapes(pred, truth)?;
    let t: Vec<f64> = truth.data().iter().map(|&v| v as f64).collect();
    Ok(bce_mean(pred.data(), &t, DEFAULT_EPSILON))
}

pub fn bce_aff(pred: &AffinityField, truth: &AffinityField) -> Result<f64> {
    pred.same_layout(truth)?;
    Ok(bce_mean(pred.data(), truth.data(), DEFAULT_EPSILON))
}

fn check_total_inputs(
    pred_seg: &ProbMap,
    gt_seg: &Mask,
    pred_aff: &AffinityField,
    gt_aff: &AffinityField,
    cfg: &LossConfig,
) -> Result<()> {
    cfg.validate()?;
    validate_shapes(pred_seg, gt_seg)?;
    validate_shapes(pred_seg, pred_aff)?;
    pred_aff.same_layout(gt_aff)
}

/// `bce_seg + bce_aff + lambda_b * acd`.
pub fn total_loss(
    pred_seg: &ProbMap,
    gt_seg: &Mask,
    pred_aff: &AffinityField,
    gt_aff: &AffinityField,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    check_total_inputs(pred_seg, gt_seg, pred_aff, gt_aff, cfg)?;
    let truth: Vec<f64> = gt_seg.data().iter().map(|&v| v as f64).collect();
    Ok(breakdown(
        pred_seg.data(),
        &truth,
        &planes(pred_aff),
        &planes(gt_aff),
        cfg,
    ))
}

fn breakdown(
    seg: &[f64],
    seg_truth: &[f64],
    aff: &Planes<'_>,
    aff_truth: &Planes<'_>,
    cfg: &LossConfig,
) -> LossBreakdown {
    let bce_seg = bce_mean(seg, seg_truth, cfg.epsilon);
    let bce_aff = bce_mean(aff.data, aff_truth.data, cfg.epsilon);
    let acd = acd_mean(aff, aff_truth, cfg.epsilon);
    LossBreakdown {
        bce_seg,
        bce_aff,
        acd,
        lambda_b: cfg.lambda_b,
        total: bce_seg + bce_aff + cfg.lambda_b * acd,
    }
}

pub fn grad_total_loss(
    pred_seg: &ProbMap,
    gt_seg: &Mask,
    pred_aff: &AffinityField,
    gt_aff: &AffinityField,
    cfg: &LossConfig,
) -> Result<TotalLossGradient> {
    check_total_inputs(pred_seg, gt_seg, pred_aff, gt_aff, cfg)?;
    let truth: Vec<f64> = gt_seg.data().iter().map(|&v| v as f64).collect();
    Ok(gradient(
        pred_seg.data(),
        &truth,
        &planes(pred_aff),
        &planes(gt_aff),
        cfg,
    ))
}

fn gradient(
    seg: &[f64],
    seg_truth: &[f64],
    aff: &Planes<'_>,
    aff_truth: &Planes<'_>,
    cfg: &LossConfig,
) -> TotalLossGradient {
    let mut g_seg = vec![0.0; seg.len()];
    bce_grad_into(seg, seg_truth, cfg.epsilon, 1.0, &mut g_seg);
    let mut g_aff = vec![0.0; aff.data.len()];
    bce_grad_into(aff.data, aff_truth.data, cfg.epsilon, 1.0, &mut g_aff);
    acd_grad_into(aff, aff_truth, cfg.epsilon, cfg.lambda_b, &mut g_aff);
    TotalLossGradient { seg: g_seg, aff: g_aff }
}

/// A scalar function with an analytic gradient, for finite-difference checks.
pub trait Differentiable {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Whether the function is smooth on `[x_i - h, x_i + h]` along coordinate `i`.
    fn smooth_at(&self, _x: &[f64], _i: usize, _h: f64) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// Max over checked coordinates of `|analytic - fd| / (|analytic| + h)`.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    /// Coordinates skipped because the function is not smooth there.
    pub excluded: Vec<usize>,
}

/// Compares an analytic gradient with central differences at `point`.
pub fn fd_check<F: Differentiable + ?Sized>(f: &F, point: &[f64], h: f64) -> Result<FdReport> {
    if !(1e-8..=1e-3).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must lie in [1e-8, 1e-3], got {h}"
        )));
    }
    let analytic = f.gradient(point);
    if analytic.len() != point.len() {
        return Err(Error::InvalidValue(format!(
            "gradient has {} entries for a {}-dimensional point",
            analytic.len(),
            point.len()
        )));
    }
    let mut x = point.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        excluded: Vec::new(),
    };
    for i in 0..x.len() {
        if !f.smooth_at(point, i, h) {
            report.excluded.push(i);
            continue;
        }
        let x0 = x[i];
        x[i] = x0 + h;
        let up = f.value(&x);
        x[i] = x0 - h;
        let down = f.value(&x);
        x[i] = x0;
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + h);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    Ok(report)
}

/// The total loss as a function of the flattened predictions
/// `[pred_seg..., pred_aff...]` with ground truth held fixed.
#[derive(Debug, Clone)]
pub struct TotalLossProblem {
    shape: Shape,
    spec: NeighborhoodSpec,
    seg_truth: Vec<f64>,
    aff_truth: Vec<f64>,
    cfg: LossConfig,
}

impl TotalLossProblem {
    pub fn new(gt_seg: &Mask, gt_aff: &AffinityField, cfg: LossConfig) -> Result<Self> {
        cfg.validate()?;
        validate_shapes(gt_seg, gt_aff)?;
        Ok(Self {
            shape: gt_seg.shape(),
            spec: gt_aff.spec().clone(),
            seg_truth: gt_seg.data().iter().map(|&v| v as f64).collect(),
            aff_truth: gt_aff.data().to_vec(),
            cfg,
        })
    }

    pub fn pack(pred_seg: &ProbMap, pred_aff: &AffinityField) -> Vec<f64> {
        let mut x = pred_seg.data().to_vec();
        x.extend_from_slice(pred_aff.data());
        x
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], Planes<'a>) {
        let n = self.shape.len();
        let (seg, aff) = x.split_at(n);
        (
            seg,
            Planes {
                data: aff,
                pixels: n,
                slots: self.spec.slot_count(),
            },
        )
    }

    fn truth_planes(&self) -> Planes<'_> {
        Planes {
            data: &self.aff_truth,
            pixels: self.shape.len(),
            slots: self.spec.slot_count(),
        }
    }

    pub fn breakdown(&self, x: &[f64]) -> LossBreakdown {
        let (seg, aff) = self.split(x);
        breakdown(seg, &self.seg_truth, &aff, &self.truth_planes(), &self.cfg)
    }
}

impl Differentiable for TotalLossProblem {
    fn value(&self, x: &[f64]) -> f64 {
        self.breakdown(x).total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (seg, aff) = self.split(x);
        let g = gradient(seg, &self.seg_truth, &aff, &self.truth_planes(), &self.cfg);
        let mut out = g.seg;
        out.extend(g.aff);
        out
    }

    fn smooth_at(&self, x: &[f64], i: usize, h: f64) -> bool {
        let eps = self.cfg.epsilon;
        if x[i] - h <= eps || x[i] + h >= 1.0 - eps {
            return false;
        }
        let n = self.shape.len();
        if i < n {
            return true;
        }
        let (_, aff) = self.split(x);
        let px = (i - n) % n;
        let truth = self.truth_planes();
        let (_, yy, gg) = aff.dot_norms(&truth, px);
        // the guarded ACD term is constant when the truth vector is zero
        gg.sqrt() <= eps || yy.sqrt() - h > eps
    }
}

/// Seeded random loss instance: a random mask, its ground-truth field, and
/// predictions drawn uniformly from `[0.02, 0.98]`.
#[derive(Debug, Clone)]
pub struct LossInstance {
    pub gt_seg: Mask,
    pub gt_aff: AffinityField,
    pub pred_seg: ProbMap,
    pub pred_aff: AffinityField,
}

impl LossInstance {
    pub fn random(seed: u64, width: usize, height: usize, spec: &NeighborhoodSpec) -> Self {
        let mut rng = rng_new(seed);
        let gt_seg = Mask::from_fn(width, height, |_, _| rng.random_bool(0.4));
        let gt_aff = compute_affinity(&gt_seg, spec);
        let mut draw = || 0.02 + 0.96 * rng.random::<f64>();
        let pred_seg =
            ProbMap::new(width, height, (0..width * height).map(|_| draw()).collect()).expect("draws lie in [0, 1]");
        let pred_aff =
            AffinityField::from_fn(width, height, spec.clone(), |_, _, _| draw()).expect("draws lie in [0, 1]");
        Self {
            gt_seg,
            gt_aff,
            pred_seg,
            pred_aff,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::NeighborhoodSpec;

    fn field(values: &[f64]) -> AffinityField {
        AffinityField::new(1, 1, NeighborhoodSpec::single3(), values.to_vec()).unwrap()
    }

    #[test]
    fn acd_identical_and_orthogonal() {
        let t = field(&[1., 1., 0., 0., 1., 0., 0., 0.]);
        assert!(acd_loss(&t, &t).unwrap().abs() < 1e-12);
        let a = field(&[1., 0., 0., 0., 0., 0., 0., 0.]);
        let b = field(&[0., 1., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(acd_loss(&b, &a).unwrap(), 1.0);
    }

    #[test]
    fn acd_single_pixel_example() {
        let truth = field(&[1., 1., 0., 0., 0., 0., 0., 0.]);
        let pred = field(&[1., 0., 0., 0., 0., 0., 0., 0.]);
        let got = acd_loss(&pred, &truth).unwrap();
        assert!((got - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-9, "{got}");
        assert!((got - 0.29289).abs() < 1e-5);
    }

    #[test]
    fn acd_zero_vectors_contribute_zero_similarity() {
        let zero = field(&[0.0; 8]);
        let one = field(&[1.0; 8]);
        assert_eq!(acd_loss(&one, &zero).unwrap(), 1.0);
        assert_eq!(acd_loss(&zero, &one).unwrap(), 1.0);
    }

    #[test]
    fn acd_layout_mismatch() {
        let a = field(&[1.0; 8]);
        let b = AffinityField::new(1, 1, NeighborhoodSpec::new(vec![5]).unwrap(), vec![1.0; 8]).unwrap();
        assert!(matches!(acd_loss(&a, &b), Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn bce_anchors() {
        assert!(bce(&[1.0, 1.0], &[1.0, 1.0], DEFAULT_EPSILON).unwrap() < 1e-5);
        let half = bce(&[0.5; 4], &[1.0, 0.0, 0.0, 1.0], DEFAULT_EPSILON).unwrap();
        assert!((half - std::f64::consts::LN_2).abs() < 1e-9);
        let got = bce(&[0.9, 0.2], &[1.0, 0.0], DEFAULT_EPSILON).unwrap();
        assert!((got - 0.164252).abs() < 1e-6, "{got}");
        assert!(bce(&[0.5], &[], DEFAULT_EPSILON).is_err());
    }

    #[test]
    fn total_loss_arithmetic() {
        // bce_seg + bce_aff + lambda * acd with terms (0.1, 0.2, 0.05)
        let total = 0.1 + 0.2 + DEFAULT_LAMBDA_B * 0.05;
        assert!((total - 0.55).abs() < 1e-12);

        let inst = LossInstance::random(3, 6, 5, &NeighborhoodSpec::new(vec![3, 5]).unwrap());
        let zero = LossConfig::new(0.0, DEFAULT_EPSILON).unwrap();
        let b = total_loss(&inst.pred_seg, &inst.gt_seg, &inst.pred_aff, &inst.gt_aff, &zero).unwrap();
        assert_eq!(b.total, b.bce_seg + b.bce_aff);
        let five = LossConfig::default();
        let b5 = total_loss(&inst.pred_seg, &inst.gt_seg, &inst.pred_aff, &inst.gt_aff, &five).unwrap();
        assert_eq!(b5.total, b5.bce_seg + b5.bce_aff + 5.0 * b5.acd);
        assert!(b5.total >= b.total);
    }

    #[test]
    fn perfect_prediction_total_near_zero() {
        let mask = Mask::from_rows(&["0110", "0110", "0010"]);
        let spec = NeighborhoodSpec::new(vec![3]).unwrap();
        let aff = compute_affinity(&mask, &spec);
        let b = total_loss(&ProbMap::from_mask(&mask), &mask, &aff, &aff, &LossConfig::default()).unwrap();
        // corner pixels have nonzero truth vectors here, so ACD is exactly attainable
        assert!(b.total < 1e-4, "{b:?}");
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::new(-1.0, 1e-7).is_err());
        assert!(LossConfig::new(1.0, 0.0).is_err());
        assert!(LossConfig::new(1.0, 1e-3).is_err());
        assert!(LossConfig::new(0.0, 1e-6).is_ok());
    }

    #[test]
    fn bce_gradient_vanishes_at_clamped_truth() {
        let mask = Mask::from_rows(&["01"]);
        let spec = NeighborhoodSpec::single3();
        let aff = compute_affinity(&mask, &spec);
        let g = grad_total_loss(&ProbMap::from_mask(&mask), &mask, &aff, &aff, &LossConfig::default()).unwrap();
        assert!(g.seg.iter().all(|v| v.abs() <= 1e-6));
    }

    #[test]
    fn acd_gradient_zero_for_zero_truth_pixel() {
        // a single-pixel image has every neighbor out of bounds: truth vector is zero
        let mask = Mask::from_rows(&["1"]);
        let spec = NeighborhoodSpec::single3();
        let gt = compute_affinity(&mask, &spec);
        assert!(gt.data().iter().all(|&v| v == 0.0));
        let pred = field(&[0.3, 0.6, 0.2, 0.9, 0.5, 0.5, 0.4, 0.1]);
        let no_bce = LossConfig::new(1.0, DEFAULT_EPSILON).unwrap();
        let g = grad_total_loss(&ProbMap::from_mask(&mask), &mask, &pred, &gt, &no_bce).unwrap();
        let mut bce_only = vec![0.0; 8];
        bce_grad_into(pred.data(), gt.data(), DEFAULT_EPSILON, 1.0, &mut bce_only);
        assert_eq!(g.aff, bce_only);
    }

    struct Quadratic;

    impl Differentiable for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v + v).sum()
        }

        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            x.iter()
                .enumerate()
                .map(|(i, v)| 2.0 * (i as f64 + 1.0) * v + 1.0)
                .collect()
        }
    }

    #[test]
    fn fd_check_on_quadratic() {
        let r = fd_check(&Quadratic, &[0.3, -1.2, 2.5, 0.0], 1e-4).unwrap();
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert!(fd_check(&Quadratic, &[0.0], 1e-2).is_err());
        assert!(fd_check(&Quadratic, &[0.0], 1e-9).is_err());
    }

    #[test]
    fn fd_check_total_loss_seeded() {
        let spec = NeighborhoodSpec::new(vec![3, 5, 7]).unwrap();
        let inst = LossInstance::random(11, 8, 8, &spec);
        let problem = TotalLossProblem::new(&inst.gt_seg, &inst.gt_aff, LossConfig::default()).unwrap();
        let x = TotalLossProblem::pack(&inst.pred_seg, &inst.pred_aff);
        let r = fd_check(&problem, &x, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert!(r.excluded.is_empty());
    }

    #[test]
    fn fd_check_flags_clamp_boundary() {
        let spec = NeighborhoodSpec::single3();
        let inst = LossInstance::random(5, 4, 4, &spec);
        let problem = TotalLossProblem::new(&inst.gt_seg, &inst.gt_aff, LossConfig::default()).unwrap();
        let mut x = TotalLossProblem::pack(&inst.pred_seg, &inst.pred_aff);
        x[2] = 1.0 - DEFAULT_EPSILON;
        x[20] = DEFAULT_EPSILON;
        let r = fd_check(&problem, &x, 1e-6).unwrap();
        assert_eq!(r.excluded, vec![2, 20]);
        assert!(r.max_rel_error < 1e-4);
    }
}
