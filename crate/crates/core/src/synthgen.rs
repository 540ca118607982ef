//! Deterministic synthetic vessel fixtures.
//!
//! Trees are grown breadth-first from a root near the bottom edge. Every
//! segment is rasterized as a tapered capsule around an integer-endpoint
//! centerline, so the generator knows the exact skeleton and thickness of what
//! it drew.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{Grayscale, Grid, Mask, RealMap, Shape};
use crate::metrics::edt::{distance_to_background, distance_to_sites};
use crate::metrics::morphology::dilate_disk;
use crate::metrics::skeleton::skeletonize;
use crate::rng::{rng_new, DetRng};

pub const MIN_CANVAS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Total number of segments.
    pub branch_count: usize,
    /// Vessel width in pixels: the root starts at the max, children taper toward the min.
    pub width_range: (f64, f64),
    /// Uniform jitter (degrees) added to branching and heading angles.
    pub branch_angle_jitter: f64,
    pub segment_length_range: (f64, f64),
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 128,
            height: 128,
            branch_count: 7,
            width_range: (2.0, 7.0),
            branch_angle_jitter: 15.0,
            segment_length_range: (20.0, 36.0),
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_CANVAS || self.height < MIN_CANVAS {
            return Err(Error::CanvasTooSmall {
                width: self.width,
                height: self.height,
            });
        }
        if self.branch_count == 0 {
            return Err(Error::InvalidParameter("branch_count must be >= 1".into()));
        }
        let (lo, hi) = self.width_range;
        if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "width range must satisfy 1 <= min <= max, got ({lo}, {hi})"
            )));
        }
        let (lo, hi) = self.segment_length_range;
        if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "segment length range must satisfy 1 <= min <= max, got ({lo}, {hi})"
            )));
        }
        if !(self.branch_angle_jitter.is_finite() && self.branch_angle_jitter >= 0.0) {
            return Err(Error::InvalidParameter("branch angle jitter must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTree {
    pub mask: Mask,
    /// Rasterized generating centerline; always a subset of `mask`.
    pub skeleton: Mask,
    /// Drawn vessel width per pixel, 0 off the mask.
    pub thickness: RealMap,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: (i64, i64),
    end: (i64, i64),
    w0: f64,
    w1: f64,
}

struct Tip {
    at: (i64, i64),
    heading: f64,
    width: f64,
}

const TAPER: f64 = 0.85;
const CHILD_SHRINK: f64 = 0.85;
const SPLIT_ANGLE: f64 = 28.0;

fn jitter(rng: &mut DetRng, degrees: f64) -> f64 {
    if degrees == 0.0 {
        0.0
    } else {
        rng.random_range(-degrees..=degrees) * PI / 180.0
    }
}

fn grow(params: &TreeParams, rng: &mut DetRng) -> Vec<Segment> {
    let (w, h) = (params.width as i64, params.height as i64);
    let (wmin, wmax) = params.width_range;
    let margin = (wmax / 2.0).ceil() as i64 + 1;
    let clamp = |p: (f64, f64)| {
        (
            (p.0.round() as i64).clamp(margin, h - 1 - margin),
            (p.1.round() as i64).clamp(margin, w - 1 - margin),
        )
    };

    let root = clamp((
        (h - 1 - margin) as f64,
        w as f64 / 2.0 + rng.random_range(-0.15..=0.15) * w as f64,
    ));
    let mut queue = VecDeque::from([Tip {
        at: root,
        heading: -PI / 2.0 + jitter(rng, params.branch_angle_jitter),
        width: wmax,
    }]);
    let mut segments = Vec::with_capacity(params.branch_count);
    while segments.len() < params.branch_count {
        let Some(tip) = queue.pop_front() else { break };
        let (lo, hi) = params.segment_length_range;
        let len = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let end = clamp((
            tip.at.0 as f64 + len * tip.heading.sin(),
            tip.at.1 as f64 + len * tip.heading.cos(),
        ));
        if end == tip.at {
            continue;
        }
        let w1 = (tip.width * TAPER).max(wmin);
        segments.push(Segment {
            start: tip.at,
            end,
            w0: tip.width,
            w1,
        });
        let child_w = (w1 * CHILD_SHRINK).max(wmin);
        for side in [-1.0, 1.0] {
            let spread = SPLIT_ANGLE * PI / 180.0 + jitter(rng, params.branch_angle_jitter);
            queue.push_back(Tip {
                at: end,
                heading: tip.heading + side * spread,
                width: child_w,
            });
        }
    }
    segments
}

/// Integer line from `a` to `b` (inclusive), 8-connected.
fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut r, mut c) = a;
    let dr = (b.0 - a.0).abs();
    let dc = -(b.1 - a.1).abs();
    let sr = if a.0 < b.0 { 1 } else { -1 };
    let sc = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dr + dc;
    let mut out = Vec::new();
    loop {
        out.push((r, c));
        if (r, c) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
    out
}

fn rasterize(shape: Shape, segments: &[Segment]) -> GeneratedTree {
    let n = shape.len();
    let mut mask = vec![0u8; n];
    let mut skel = vec![0u8; n];
    let mut thick = vec![0.0f64; n];
    for s in segments {
        let (r0, c0) = (s.start.0 as f64, s.start.1 as f64);
        let (r1, c1) = (s.end.0 as f64, s.end.1 as f64);
        let (dr, dc) = (r1 - r0, c1 - c0);
        let len2 = dr * dr + dc * dc;
        let pad = s.w0.max(s.w1) / 2.0 + 1.0;
        let rmin = (r0.min(r1) - pad).floor().max(0.0) as usize;
        let rmax = ((r0.max(r1) + pad).ceil() as usize).min(shape.height - 1);
        let cmin = (c0.min(c1) - pad).floor().max(0.0) as usize;
        let cmax = ((c0.max(c1) + pad).ceil() as usize).min(shape.width - 1);
        for r in rmin..=rmax {
            for c in cmin..=cmax {
                let (pr, pc) = (r as f64 - r0, c as f64 - c0);
                let t = if len2 > 0.0 {
                    ((pr * dr + pc * dc) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (er, ec) = (pr - t * dr, pc - t * dc);
                let width = s.w0 + (s.w1 - s.w0) * t;
                if er * er + ec * ec <= width * width / 4.0 {
                    let i = shape.index(r, c);
                    mask[i] = 1;
                    thick[i] = thick[i].max(width);
                }
            }
        }
        let pts = bresenham(s.start, s.end);
        let last = (pts.len() - 1).max(1) as f64;
        for (k, (r, c)) in pts.into_iter().enumerate() {
            let i = shape.index(r as usize, c as usize);
            skel[i] = 1;
            mask[i] = 1;
            if thick[i] == 0.0 {
                thick[i] = s.w0 + (s.w1 - s.w0) * k as f64 / last;
            }
        }
    }
    GeneratedTree {
        mask: Mask::from_raw(shape, mask),
        skeleton: Mask::from_raw(shape, skel),
        thickness: RealMap::from_raw(shape, thick),
    }
}

/// Random branching tree with its exact centerline and per-pixel width.
pub fn generate_tree(params: &TreeParams) -> Result<GeneratedTree> {
    params.validate()?;
    let mut rng = rng_new(params.seed);
    let segments = grow(params, &mut rng);
    Ok(rasterize(Shape::new(params.height, params.width), &segments))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeParams {
    /// Number of gaps cut across the vessel.
    pub break_count: usize,
    /// Disk dilation radius in pixels (adds false positives).
    pub dilation: f64,
    /// Probability of switching on each isolated background pixel.
    pub noise_rate: f64,
}

impl Default for DegradeParams {
    fn default() -> Self {
        Self {
            break_count: 0,
            dilation: 0.0,
            noise_rate: 0.0,
        }
    }
}

/// Skeleton pixels with exactly two skeleton neighbors, in raster order.
fn regular_path_points(skeleton: &Mask) -> (Vec<(usize, usize)>, Mask) {
    let shape = skeleton.shape();
    let mut regular = Vec::new();
    let mut special = Mask::empty(shape.width, shape.height).into_raw();
    for (r, c) in skeleton.iter_set() {
        let mut k = 0;
        for dr in -1..=1 {
            for dc in -1..=1 {
                if (dr, dc) != (0, 0) && shape.offset(r, c, dr, dc).is_some_and(|(nr, nc)| skeleton.get(nr, nc)) {
                    k += 1;
                }
            }
        }
        if k == 2 {
            regular.push((r, c));
        } else {
            special[shape.index(r, c)] = 1;
        }
    }
    (regular, Mask::from_raw(shape, special))
}

/// Cut sites chosen greedily from a seeded shuffle; the sites for a smaller
/// `count` are always a prefix of those for a larger one.
fn break_sites(mask: &Mask, count: usize, rng: &mut DetRng) -> Vec<((usize, usize), f64)> {
    if count == 0 {
        return Vec::new();
    }
    let shape = mask.shape();
    let skeleton = skeletonize(mask);
    let inner = distance_to_background(mask);
    let (mut candidates, special) = regular_path_points(&skeleton);
    let to_special = distance_to_sites(&special);
    candidates.shuffle(rng);
    let mut picked: Vec<((usize, usize), f64)> = Vec::new();
    for (r, c) in candidates {
        let radius = inner[shape.index(r, c)] + 1.5;
        if to_special.distance(r, c) < radius + 3.0 {
            continue;
        }
        let clear = picked.iter().all(|&((pr, pc), pradius)| {
            let d = ((pr as f64 - r as f64).powi(2) + (pc as f64 - c as f64).powi(2)).sqrt();
            d > 2.0 * (radius + pradius) + 4.0
        });
        if clear {
            picked.push(((r, c), radius));
            if picked.len() == count {
                break;
            }
        }
    }
    picked
}

/// Cuts gaps, dilates, and sprinkles isolated false-positive pixels.
/// Fewer than `break_count` gaps are cut when the skeleton has no room for more.
pub fn degrade(mask: &Mask, seed: u64, params: &DegradeParams) -> Result<Mask> {
    if !(0.0..1.0).contains(&params.noise_rate) {
        return Err(Error::InvalidParameter(format!(
            "noise rate must lie in [0, 1), got {}",
            params.noise_rate
        )));
    }
    if !(params.dilation.is_finite() && params.dilation >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dilation must be finite and >= 0, got {}",
            params.dilation
        )));
    }
    let shape = mask.shape();
    let mut rng = rng_new(seed);
    let mut out = mask.clone().into_raw();
    for ((sr, sc), radius) in break_sites(mask, params.break_count, &mut rng) {
        let reach = radius.ceil() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if ((dr * dr + dc * dc) as f64) <= radius * radius {
                    if let Some((r, c)) = shape.offset(sr, sc, dr, dc) {
                        out[shape.index(r, c)] = 0;
                    }
                }
            }
        }
    }
    let mut out = dilate_disk(&Mask::from_raw(shape, out), params.dilation);
    if params.noise_rate > 0.0 {
        let base = out.clone();
        let mut data = out.into_raw();
        for r in 0..shape.height {
            for c in 0..shape.width {
                let isolated = (-1..=1)
                    .all(|dr| (-1..=1).all(|dc| shape.offset(r, c, dr, dc).is_none_or(|(nr, nc)| !base.get(nr, nc))));
                if rng.random_bool(params.noise_rate) && isolated {
                    data[shape.index(r, c)] = 1;
                }
            }
        }
        out = Mask::from_raw(shape, data);
    }
    Ok(out)
}

/// Pseudo-angiogram: bright background, vessels darker by `contrast * 255`,
/// additive Gaussian noise, clipped to [0, 255].
pub fn render_intensity(mask: &Mask, seed: u64, contrast: f64, noise_sigma: f64) -> Result<Grayscale> {
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contrast must lie in (0, 1], got {contrast}"
        )));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = rng_new(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let vessel = 255.0 * (1.0 - contrast);
    let data = mask
        .data()
        .iter()
        .map(|&m| {
            let base = if m != 0 { vessel } else { 255.0 };
            let v = if noise_sigma > 0.0 {
                base + noise.sample(&mut rng)
            } else {
                base
            };
            v.clamp(0.0, 255.0)
        })
        .collect();
    Ok(Grayscale::from_raw(mask.shape(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::morphology::count_components;
    use crate::metrics::{buffer_match, pixel_metrics, split_thin_thick, topo_metrics};
    use crate::perturb::adjust_contrast;

    #[test]
    fn deterministic_per_seed() {
        let p = TreeParams {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(generate_tree(&p).unwrap(), generate_tree(&p).unwrap());
        let q = TreeParams {
            seed: 10,
            ..Default::default()
        };
        assert_ne!(generate_tree(&p).unwrap().mask, generate_tree(&q).unwrap().mask);
    }

    #[test]
    fn canvas_too_small() {
        let p = TreeParams {
            width: 31,
            ..Default::default()
        };
        assert!(matches!(generate_tree(&p), Err(Error::CanvasTooSmall { .. })));
    }

    #[test]
    fn generator_invariants() {
        for seed in 0..10 {
            let t = generate_tree(&TreeParams {
                seed,
                ..Default::default()
            })
            .unwrap();
            assert!(t.skeleton.minus(&t.mask).unwrap().is_empty());
            for (i, &m) in t.mask.data().iter().enumerate() {
                let th = t.thickness.data()[i];
                if m != 0 {
                    assert!(th >= 1.0);
                } else {
                    assert_eq!(th, 0.0);
                }
            }
            assert_eq!(count_components(&t.skeleton), 1);
        }
    }

    #[test]
    fn straight_thin_segment_is_all_thin() {
        let p = TreeParams {
            branch_count: 1,
            width_range: (3.0, 3.0),
            branch_angle_jitter: 0.0,
            ..Default::default()
        };
        let t = generate_tree(&p).unwrap();
        let s = split_thin_thick(&t.mask, 7.0);
        assert_eq!(s.thin, t.mask);
        assert!(s.thick.is_empty());
    }

    #[test]
    fn skeleton_recovers_generator_centerline() {
        for seed in 0..5 {
            let t = generate_tree(&TreeParams {
                seed,
                ..Default::default()
            })
            .unwrap();
            let m = buffer_match(&skeletonize(&t.mask), &t.skeleton, 2.0).unwrap();
            let c = topo_metrics(&m).completeness;
            assert!(c >= 0.95, "seed {seed}: completeness {c}");
        }
    }

    #[test]
    fn degrade_identity() {
        let t = generate_tree(&TreeParams::default()).unwrap();
        assert_eq!(degrade(&t.mask, 1, &DegradeParams::default()).unwrap(), t.mask);
    }

    #[test]
    fn breaks_split_a_single_path() {
        let bar = Mask::from_fn(120, 20, |r, c| (8..13).contains(&r) && (5..115).contains(&c));
        let out = degrade(
            &bar,
            3,
            &DegradeParams {
                break_count: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(count_components(&out), 4);
        assert!(out.minus(&bar).unwrap().is_empty());
    }

    #[test]
    fn dilation_adds_only_false_positives() {
        let t = generate_tree(&TreeParams::default()).unwrap();
        let out = degrade(
            &t.mask,
            0,
            &DegradeParams {
                dilation: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        let p = pixel_metrics(&out, &t.mask).unwrap();
        assert!(p.precision < 1.0);
        assert_eq!(p.recall, 1.0);
    }

    #[test]
    fn noise_flips_isolated_pixels() {
        let t = generate_tree(&TreeParams::default()).unwrap();
        let params = DegradeParams {
            noise_rate: 0.01,
            ..Default::default()
        };
        let out = degrade(&t.mask, 4, &params).unwrap();
        assert!(out.count() > t.mask.count());
        assert_eq!(out, degrade(&t.mask, 4, &params).unwrap());
        assert!(degrade(
            &t.mask,
            4,
            &DegradeParams {
                noise_rate: 1.0,
                ..params
            }
        )
        .is_err());
    }

    #[test]
    fn render_two_level() {
        let t = generate_tree(&TreeParams::default()).unwrap();
        let img = render_intensity(&t.mask, 0, 1.0, 0.0).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0 || v == 255.0));
        assert_eq!(adjust_contrast(&img, 1.0, false).unwrap(), img);
        let noisy = render_intensity(&t.mask, 0, 0.5, 10.0).unwrap();
        assert!(noisy.is_in_byte_range());
        assert!(render_intensity(&t.mask, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn mean_intensity_falls_with_vessel_area() {
        let mut trees: Vec<Mask> = [3, 7, 15]
            .iter()
            .map(|&b| {
                generate_tree(&TreeParams {
                    seed: 21,
                    branch_count: b,
                    ..Default::default()
                })
                .unwrap()
                .mask
            })
            .collect();
        trees.sort_by_key(|m| m.count());
        let means: Vec<f64> = trees
            .iter()
            .map(|m| render_intensity(m, 5, 0.6, 0.0).unwrap().mean())
            .collect();
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }
}
