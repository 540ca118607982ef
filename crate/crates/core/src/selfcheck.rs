//! Deterministic self-verification suite: oracle comparisons, gradient
//! checks, and algebraic properties on seeded random instances.
//!
//! Reports contain no timings, so two runs produce identical output.

use std::fmt;

use rand::Rng;

use crate::affinity::{compute_affinity, Direction, NeighborhoodSpec};
use crate::grid::{AffinityField, FeatureMap, Grayscale, Grid, Mask, ScaleWeightMap};
use crate::losses::{acd_loss, bce, fd_check, LossConfig, LossInstance, TotalLossProblem, DEFAULT_EPSILON};
use crate::metrics::{
    buffer_match, evaluate, quality, skeletonize, split_thin_thick, topo_metrics, EvalConfig, MatchReport,
    THRESHOLD_ANGIO,
};
use crate::oracle;
use crate::perturb::{adjust_contrast, DRIVE_RATIOS, XCAD_RATIOS};
use crate::rng::{derive_seed, rng_new, DetRng};
use crate::strengthening::{select_vector, smafs, smafs_with_selection, uafs, SelectionField};
use crate::synthgen::{degrade, generate_tree, render_intensity, DegradeParams, TreeParams};

pub const DEFAULT_SEED: u64 = 20240917;

pub const SCALE_LISTS: [&[u32]; 3] = [&[3], &[3, 5, 7], &[3, 9, 15]];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn stream(seed: u64, name: &str, index: u64) -> DetRng {
    let tag = name
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    rng_new(derive_seed(derive_seed(seed, tag), index))
}

/// Random mask with side lengths in `1..=max_side` and random density.
pub fn random_mask(rng: &mut DetRng, max_side: usize) -> Mask {
    let (w, h) = (rng.random_range(1..=max_side), rng.random_range(1..=max_side));
    let p = rng.random_range(0.15..0.85);
    Mask::from_fn(w, h, |_, _| rng.random_bool(p))
}

/// Affinity values on the grid `k / 64`, so slot sums are exact and ties occur.
fn dyadic_field(rng: &mut DetRng, w: usize, h: usize, spec: &NeighborhoodSpec) -> AffinityField {
    AffinityField::from_fn(w, h, spec.clone(), |_, _, _| rng.random_range(0..=64) as f64 / 64.0)
        .expect("values lie in [0, 1]")
}

pub fn affinity_corpus(seed: u64, count: u64) -> Vec<Mask> {
    (0..count)
        .map(|i| random_mask(&mut stream(seed, "affinity", i), 32))
        .collect()
}

/// Library affinity equals the brute-force double loop, slot for slot.
pub fn affinity_oracle(seed: u64, count: u64) -> Check {
    let mut mismatched = 0usize;
    let mut slots = 0usize;
    for mask in affinity_corpus(seed, count) {
        for scales in SCALE_LISTS {
            let spec = NeighborhoodSpec::new(scales.to_vec()).expect("valid scales");
            let got = compute_affinity(&mask, &spec);
            let want = oracle::affinity(&mask, scales);
            slots += want.len();
            mismatched += got.data().iter().zip(&want).filter(|(a, b)| a != b).count();
        }
    }
    Check::new(
        "affinity-oracle",
        mismatched == 0,
        format!(
            "{count} masks x {} scale lists, {mismatched} of {slots} slots differ",
            SCALE_LISTS.len()
        ),
    )
}

/// Reciprocity across in-bounds neighbour pairs and invariance under label inversion.
pub fn affinity_symmetries(seed: u64, count: u64) -> Check {
    let mut recip = 0usize;
    let mut inversion = 0usize;
    let mut pairs = 0usize;
    for mask in affinity_corpus(seed, count) {
        let shape = mask.shape();
        for scales in SCALE_LISTS {
            let spec = NeighborhoodSpec::new(scales.to_vec()).expect("valid scales");
            let field = compute_affinity(&mask, &spec);
            if compute_affinity(&mask.invert(), &spec) != field {
                inversion += 1;
            }
            for si in 0..scales.len() {
                let radius = spec.radius(si) as isize;
                for dir in Direction::ALL {
                    let (dr, dc) = dir.unit();
                    let slot = spec.slot_index(si, dir);
                    let back = spec.slot_index(si, dir.opposite());
                    for r in 0..shape.height {
                        for c in 0..shape.width {
                            if let Some((nr, nc)) = shape.offset(r, c, dr * radius, dc * radius) {
                                pairs += 1;
                                if field.get(slot, r, c) != field.get(back, nr, nc) {
                                    recip += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Check::new(
        "affinity-symmetries",
        recip == 0 && inversion == 0,
        format!("{pairs} neighbour pairs: {recip} reciprocity violations, {inversion} inversion violations"),
    )
}

/// Analytic total-loss gradient against central differences.
pub fn loss_gradients(seed: u64, count: u64, h: f64, tolerance: f64) -> Check {
    let spec = NeighborhoodSpec::new(vec![3, 5, 7]).expect("valid scales");
    let cfg = LossConfig::default();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut excluded = 0usize;
    for i in 0..count {
        let inst = LossInstance::random(derive_seed(seed, 1000 + i), 8, 8, &spec);
        let problem = TotalLossProblem::new(&inst.gt_seg, &inst.gt_aff, cfg).expect("consistent instance");
        let x = TotalLossProblem::pack(&inst.pred_seg, &inst.pred_aff);
        match fd_check(&problem, &x, h) {
            Ok(report) => {
                worst = worst.max(report.max_rel_error);
                checked += report.checked;
                excluded += report.excluded.len();
            }
            Err(e) => return Check::new("loss-gradients", false, e.to_string()),
        }
    }
    Check::new(
        "loss-gradients",
        worst < tolerance,
        format!(
            "{count} instances 8x8, lambda_b={}, h={h:e}: max rel error {worst:.3e} over {checked} coordinates ({excluded} non-smooth skipped)",
            cfg.lambda_b
        ),
    )
}

/// Closed-form loss values.
pub fn loss_anchors(seed: u64) -> Check {
    let mut problems = Vec::new();
    let spec = NeighborhoodSpec::new(vec![3, 5]).expect("valid scales");
    let mut worst_self = 0.0f64;
    for i in 0..20 {
        let mut rng = stream(seed, "anchors", i);
        let (w, h) = (rng.random_range(1..=12), rng.random_range(1..=12));
        // strictly positive entries: every truth vector is nonzero
        let t = AffinityField::from_fn(w, h, spec.clone(), |_, _, _| rng.random_range(0.05..=1.0)).expect("unit");
        worst_self = worst_self.max(acd_loss(&t, &t).expect("same layout"));
    }
    if worst_self >= 1e-12 {
        problems.push(format!("acd(t, t) reached {worst_self:e}"));
    }
    let mut worst_ln2 = 0.0f64;
    for i in 0..20 {
        let mut rng = stream(seed, "bce-half", i);
        let n = rng.random_range(1..=64);
        let truth: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let got = bce(&vec![0.5; n], &truth, DEFAULT_EPSILON).expect("same length");
        worst_ln2 = worst_ln2.max((got - std::f64::consts::LN_2).abs());
    }
    if worst_ln2 > 1e-9 {
        problems.push(format!("bce(0.5, t) off ln 2 by {worst_ln2:e}"));
    }
    let single = |v: [f64; 8]| AffinityField::new(1, 1, NeighborhoodSpec::single3(), v.to_vec()).expect("unit");
    let acd = acd_loss(
        &single([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        &single([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    )
    .expect("same layout");
    let acd_err = (acd - (1.0 - 1.0 / 2f64.sqrt())).abs();
    if acd_err > 1e-9 {
        problems.push(format!("single-pixel acd {acd} off by {acd_err:e}"));
    }
    let detail = if problems.is_empty() {
        format!("acd(t,t) <= {worst_self:.1e}, |bce(0.5)-ln2| <= {worst_ln2:.1e}, single-pixel acd = {acd:.9}")
    } else {
        problems.join("; ")
    };
    Check::new("loss-anchors", problems.is_empty(), detail)
}

/// One random strengthening instance with at most 6x6 pixels and 3 channels.
pub struct StrengthenInstance {
    pub features: FeatureMap,
    pub pred: AffinityField,
    pub weights: ScaleWeightMap,
}

pub fn strengthen_instance(seed: u64, index: u64) -> StrengthenInstance {
    let mut rng = stream(seed, "strengthen", index);
    let (w, h) = (rng.random_range(1..=6), rng.random_range(1..=6));
    let channels = rng.random_range(1..=3);
    let scales = SCALE_LISTS[rng.random_range(0..SCALE_LISTS.len())];
    let spec = NeighborhoodSpec::new(scales.to_vec()).expect("valid scales");
    let features = FeatureMap::from_fn(channels, w, h, |_, _, _| rng.random_range(-1.0..1.0)).expect("finite");
    let pred = dyadic_field(&mut rng, w, h, &spec);
    let weights = ScaleWeightMap::new(
        scales.to_vec(),
        w,
        h,
        (0..scales.len() * w * h).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .expect("finite");
    StrengthenInstance {
        features,
        pred,
        weights,
    }
}

/// SMAFS against the direct-sum oracle, UAFS against unit-weight SMAFS, and
/// the two identity cases.
pub fn strengthening_oracle(seed: u64, count: u64) -> Check {
    let (mut oracle_bad, mut uafs_bad, mut identity_bad, mut uafs_runs) = (0, 0, 0, 0);
    for i in 0..count {
        let inst = strengthen_instance(seed, i);
        let (f, pred, w) = (&inst.features, &inst.pred, &inst.weights);
        let got = smafs(f, pred, w).expect("consistent instance");
        if got.data() != oracle::smafs(f, pred, w).as_slice() {
            oracle_bad += 1;
        }
        let scales = pred.spec().scales().to_vec();
        let zero_w = ScaleWeightMap::uniform(scales.clone(), f.width(), f.height(), 0.0).expect("finite");
        if smafs(f, pred, &zero_w).expect("consistent") != *f {
            identity_bad += 1;
        }
        let none = SelectionField::new(f.width(), f.height(), pred.spec().clone(), vec![0; pred.data().len()])
            .expect("binary");
        if smafs_with_selection(f, &none, w) != *f {
            identity_bad += 1;
        }
        if scales == [3] {
            uafs_runs += 1;
            let ones = ScaleWeightMap::uniform(scales, f.width(), f.height(), 1.0).expect("finite");
            let a = uafs(f, pred).expect("single scale");
            let b = smafs(f, pred, &ones).expect("consistent");
            let same_bits = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            if !same_bits {
                uafs_bad += 1;
            }
        }
    }
    Check::new(
        "strengthening-oracle",
        oracle_bad + uafs_bad + identity_bad == 0,
        format!(
            "{count} instances: {oracle_bad} oracle mismatches, {uafs_bad}/{uafs_runs} uafs mismatches, {identity_bad} identity violations"
        ),
    )
}

/// `select(a * y + b) == select(y)` for positive `a`.
pub fn selection_invariance(seed: u64, vectors: u64, pairs: u64) -> Check {
    let mut violations = 0usize;
    let mut ties = 0usize;
    for i in 0..vectors {
        let mut rng = stream(seed, "selection", i);
        let slots = 8 * rng.random_range(1..=3);
        // half the vectors on a coarse dyadic grid so exact ties occur
        let dyadic = i % 2 == 0;
        let y: Vec<f64> = (0..slots)
            .map(|_| {
                if dyadic {
                    rng.random_range(0..=8) as f64 / 8.0
                } else {
                    rng.random_range(0.0..=1.0)
                }
            })
            .collect();
        let base = select_vector(&y);
        let mean = y.iter().sum::<f64>() / slots as f64;
        ties += y.iter().filter(|&&v| v == mean).count();
        for _ in 0..pairs {
            let (a, b) = if dyadic {
                (
                    rng.random_range(1..=64) as f64 / 16.0,
                    rng.random_range(-64..=64) as f64 / 8.0,
                )
            } else {
                (rng.random_range(0.01..100.0), rng.random_range(-100.0..100.0))
            };
            let moved: Vec<f64> = y.iter().map(|&v| a * v + b).collect();
            if select_vector(&moved) != base {
                violations += 1;
            }
        }
    }
    Check::new(
        "selection-invariance",
        violations == 0,
        format!("{vectors} vectors x {pairs} (a, b) pairs: {violations} violations ({ties} exact mean ties)"),
    )
}

/// Quality from completeness/correctness against the count form, the
/// `min` bound, and the published arithmetic anchor.
pub fn quality_algebra(seed: u64, count: u64) -> Check {
    let mut rng = stream(seed, "quality", 0);
    let mut worst = 0.0f64;
    let mut bound = 0usize;
    for _ in 0..count {
        let tp = rng.random_range(1..=10_000u64);
        let fp = rng.random_range(0..=10_000u64);
        let fn_ = rng.random_range(0..=10_000u64);
        let report = MatchReport {
            matched_extracted: tp,
            unmatched_extracted: fp,
            matched_reference: tp,
            unmatched_reference: fn_,
            threshold: THRESHOLD_ANGIO,
        };
        let t = topo_metrics(&report);
        worst = worst.max((t.quality - oracle::quality_from_counts(tp, fp, fn_)).abs());
        if t.quality > t.completeness.min(t.correctness) {
            bound += 1;
        }
    }
    let anchor = quality(0.8453, 0.8444).map(|q| format!("{q:.4}")).unwrap_or_default();
    Check::new(
        "quality-algebra",
        worst <= 1e-12 && bound == 0 && anchor == "0.7314",
        format!(
            "{count} count tuples: max |Q - TP/(TP+FP+FN)| = {worst:.1e}, {bound} bound violations; anchor {anchor}"
        ),
    )
}

/// Pair of skeletons for buffer-matching tests, up to 64x64.
pub fn skeleton_pair(seed: u64, index: u64) -> (Mask, Mask) {
    let mut rng = stream(seed, "buffer", index);
    let (w, h) = (rng.random_range(4..=64), rng.random_range(4..=64));
    let blob = |rng: &mut DetRng| {
        let p = rng.random_range(0.2..0.7);
        skeletonize(&Mask::from_fn(w, h, |_, _| rng.random_bool(p)))
    };
    let a = blob(&mut rng);
    let b = blob(&mut rng);
    (a, b)
}

pub fn buffer_matching_oracle(seed: u64, count: u64) -> Check {
    let thresholds = [1.0, 2.0, 3.0];
    let mut mismatched = 0usize;
    let mut non_monotone = 0usize;
    for i in 0..count {
        let (a, b) = skeleton_pair(seed, i);
        let mut prev: Option<MatchReport> = None;
        for t in thresholds {
            let m = buffer_match(&a, &b, t).expect("same shape");
            let got = (
                m.matched_extracted,
                m.unmatched_extracted,
                m.matched_reference,
                m.unmatched_reference,
            );
            if got != oracle::buffer_match(&a, &b, t) {
                mismatched += 1;
            }
            if let Some(p) = prev {
                if m.matched_extracted < p.matched_extracted || m.matched_reference < p.matched_reference {
                    non_monotone += 1;
                }
            }
            prev = Some(m);
        }
    }
    Check::new(
        "buffer-matching-oracle",
        mismatched == 0 && non_monotone == 0,
        format!(
            "{count} skeleton pairs x {} thresholds: {mismatched} mismatches, {non_monotone} monotonicity violations",
            thresholds.len()
        ),
    )
}

pub const PIPELINE_BREAKS: [usize; 4] = [0, 2, 4, 8];

pub fn pipeline_tree(seed: u64) -> TreeParams {
    TreeParams {
        seed,
        width: 192,
        height: 192,
        branch_count: 15,
        ..Default::default()
    }
}

/// Completeness after `generate_tree -> degrade(k) -> evaluate` for each k.
pub fn pipeline_completeness(seed: u64) -> Vec<f64> {
    let tree = generate_tree(&pipeline_tree(seed)).expect("valid params");
    PIPELINE_BREAKS
        .iter()
        .map(|&k| {
            let params = DegradeParams {
                break_count: k,
                ..Default::default()
            };
            let pred = degrade(&tree.mask, derive_seed(seed, 7), &params).expect("valid params");
            evaluate(&pred, &tree.mask, &EvalConfig::default())
                .expect("same shape")
                .topo
                .completeness
        })
        .collect()
}

pub fn synthetic_pipeline(seed: u64, trees: u64) -> Check {
    let mut non_decreasing = Vec::new();
    let mut imperfect = 0usize;
    for i in 0..trees {
        let s = derive_seed(seed, 500 + i);
        let c = pipeline_completeness(s);
        if c.windows(2).any(|w| w[1] >= w[0]) {
            non_decreasing.push(format!("{c:.4?}"));
        }
        let tree = generate_tree(&pipeline_tree(s)).expect("valid params");
        let e = evaluate(&tree.mask, &tree.mask, &EvalConfig::default()).expect("same shape");
        let six = [
            e.pixel.precision,
            e.pixel.recall,
            e.pixel.f1,
            e.topo.correctness,
            e.topo.completeness,
            e.topo.quality,
        ];
        if six.iter().any(|&v| v != 1.0) {
            imperfect += 1;
        }
    }
    let detail = if non_decreasing.is_empty() {
        format!("{trees} trees, breaks {PIPELINE_BREAKS:?}: completeness strictly decreasing; {imperfect} imperfect self-evaluations")
    } else {
        format!("completeness not strictly decreasing: {}", non_decreasing.join(", "))
    };
    Check::new(
        "synthetic-pipeline",
        non_decreasing.is_empty() && imperfect == 0,
        detail,
    )
}

pub fn contrast_image(seed: u64, index: u64) -> Grayscale {
    let s = derive_seed(seed, 900 + index);
    let tree = generate_tree(&TreeParams {
        seed: s,
        width: 64,
        height: 64,
        branch_count: 5,
        ..Default::default()
    })
    .expect("valid params");
    render_intensity(&tree.mask, s, 0.3 + 0.05 * (index % 10) as f64, 12.0).expect("valid params")
}

pub fn contrast_properties(seed: u64, count: u64) -> Check {
    let ratios: Vec<f64> = XCAD_RATIOS.iter().chain(&DRIVE_RATIOS).copied().collect();
    let (mut identity, mut mean_err, mut compose_err) = (0usize, 0.0f64, 0.0f64);
    for i in 0..count {
        let img = contrast_image(seed, i);
        let same = adjust_contrast(&img, 1.0, false).expect("valid ratio");
        if same
            .data()
            .iter()
            .zip(img.data())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            identity += 1;
        }
        for &a in &ratios {
            let once = adjust_contrast(&img, a, false).expect("valid ratio");
            mean_err = mean_err.max((once.mean() - img.mean()).abs());
            for &b in &ratios {
                let twice = adjust_contrast(&once, b, false).expect("valid ratio");
                let direct = adjust_contrast(&img, a * b, false).expect("valid ratio");
                let err = twice
                    .data()
                    .iter()
                    .zip(direct.data())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                compose_err = compose_err.max(err);
            }
        }
    }
    Check::new(
        "contrast-properties",
        identity == 0 && mean_err < 1e-9 && compose_err < 1e-9,
        format!(
            "{count} images, {} ratios: {identity} identity failures, mean drift {mean_err:.1e}, composition error {compose_err:.1e}",
            ratios.len()
        ),
    )
}

pub fn bar(width: usize) -> Mask {
    let top = 20 - width / 2;
    Mask::from_fn(80, 41, |r, c| (top..top + width).contains(&r) && (10..70).contains(&c))
}

/// Bar classification at the 7-pixel threshold and exact partition of GT.
pub fn thin_thick_protocol(seed: u64, count: u64) -> Check {
    let mut problems = Vec::new();
    let thin = split_thin_thick(&bar(3), 7.0);
    if thin.thin != bar(3) || !thin.thick.is_empty() {
        problems.push("3-wide bar not entirely thin".to_string());
    }
    let thick = split_thin_thick(&bar(11), 7.0);
    if thick.thick != bar(11) || !thick.thin.is_empty() {
        problems.push("11-wide bar not entirely thick".to_string());
    }
    let mut bad_partitions = 0usize;
    for i in 0..count {
        let mask = if i % 2 == 0 {
            generate_tree(&TreeParams {
                seed: derive_seed(seed, 300 + i),
                ..Default::default()
            })
            .expect("valid params")
            .mask
        } else {
            random_mask(&mut stream(seed, "partition", i), 48)
        };
        let s = split_thin_thick(&mask, 7.0);
        let covers = s.vessels() == mask;
        let disjoint = s.thin.and(&s.thick).map(|m| m.is_empty()).unwrap_or(false);
        if !(covers && disjoint) {
            bad_partitions += 1;
        }
    }
    if bad_partitions > 0 {
        problems.push(format!("{bad_partitions} partitions do not cover GT exactly"));
    }
    let detail = if problems.is_empty() {
        format!("bars 3/11 classified thin/thick; {count} masks partitioned exactly")
    } else {
        problems.join("; ")
    };
    Check::new("thin-thick-protocol", problems.is_empty(), detail)
}

/// Every check at its acceptance size.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        affinity_oracle(seed, 100),
        affinity_symmetries(seed, 100),
        loss_gradients(seed, 50, 1e-6, 1e-4),
        loss_anchors(seed),
        strengthening_oracle(seed, 200),
        selection_invariance(seed, 100, 20),
        quality_algebra(seed, 1000),
        buffer_matching_oracle(seed, 100),
        synthetic_pipeline(seed, 3),
        contrast_properties(seed, 20),
        thin_thick_protocol(seed, 20),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        for check in [
            affinity_oracle(1, 5),
            affinity_symmetries(1, 5),
            loss_gradients(1, 2, 1e-6, 1e-4),
            loss_anchors(1),
            strengthening_oracle(1, 10),
            selection_invariance(1, 6, 4),
            quality_algebra(1, 50),
            buffer_matching_oracle(1, 4),
            contrast_properties(1, 2),
            thin_thick_protocol(1, 2),
        ] {
            assert!(check.passed, "{check}");
        }
    }

    #[test]
    fn reports_are_deterministic() {
        assert_eq!(strengthening_oracle(3, 5), strengthening_oracle(3, 5));
        assert_eq!(loss_gradients(3, 1, 1e-6, 1e-4), loss_gradients(3, 1, 1e-6, 1e-4));
    }
}
