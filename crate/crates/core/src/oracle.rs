//! Brute-force reference implementations, written independently of the
//! production code paths, for oracle tests.
//!
//! Nothing here is tuned for speed. Offsets are spelled out literally rather
//! than derived from [`crate::affinity::Direction`].

use crate::grid::{AffinityField, FeatureMap, Grid, Mask, ScaleWeightMap};

/// Unit offsets `(d_row, d_col)` in layout order: L, R, T, B, LT, LB, RT, RB.
pub const UNIT_OFFSETS: [(i64, i64); 8] = [(0, -1), (0, 1), (-1, 0), (1, 0), (-1, -1), (1, -1), (-1, 1), (1, 1)];

fn label(mask: &Mask, r: i64, c: i64) -> Option<bool> {
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    (r >= 0 && c >= 0 && r < h && c < w).then(|| mask.data()[(r * w + c) as usize] != 0)
}

/// Ground-truth affinity by a direct double loop over pixels, then slots.
/// Returns the slot-major flat array.
pub fn affinity(mask: &Mask, scales: &[u32]) -> Vec<f64> {
    let (h, w) = (mask.height(), mask.width());
    let slots = 8 * scales.len();
    let mut out = vec![0.0; slots * h * w];
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let own = label(mask, r, c).expect("in bounds");
            for (si, &k) in scales.iter().enumerate() {
                let radius = (k as i64 - 1) / 2;
                for (d, &(dr, dc)) in UNIT_OFFSETS.iter().enumerate() {
                    let same = label(mask, r + dr * radius, c + dc * radius) == Some(own);
                    let slot = si * 8 + d;
                    out[slot * h * w + (r as usize) * w + c as usize] = if same { 1.0 } else { 0.0 };
                }
            }
        }
    }
    out
}

/// Selection by the textbook test `y_l >= (1/N) sum_j y_j`.
///
/// Exact whenever the slot sums are exact in floating point (e.g. values on a
/// dyadic grid), which is how the oracle tests draw them.
pub fn select(pred: &AffinityField) -> Vec<bool> {
    let n = pred.shape().len();
    let slots = pred.slot_count();
    let mut out = vec![false; slots * n];
    for px in 0..n {
        let mut sum = 0.0;
        for s in 0..slots {
            sum += pred.data()[s * n + px];
        }
        let mean = sum / slots as f64;
        for s in 0..slots {
            out[s * n + px] = pred.data()[s * n + px] >= mean;
        }
    }
    out
}

/// Multi-scale strengthening as a direct triple sum over channels/pixels,
/// scales, and directions, accumulating in the same order as the library.
pub fn smafs(features: &FeatureMap, pred: &AffinityField, weights: &ScaleWeightMap) -> Vec<f64> {
    let (h, w) = (features.height() as i64, features.width() as i64);
    let scales = pred.spec().scales();
    let n = (h * w) as usize;
    let sel = select(pred);
    let mut out = Vec::with_capacity(features.data().len());
    for ch in 0..features.channels() {
        for r in 0..h {
            for c in 0..w {
                let px = (r * w + c) as usize;
                let mut acc = 0.0;
                for (si, &k) in scales.iter().enumerate() {
                    let radius = (k as i64 - 1) / 2;
                    for (d, &(dr, dc)) in UNIT_OFFSETS.iter().enumerate() {
                        let (nr, nc) = (r + dr * radius, c + dc * radius);
                        if !sel[(si * 8 + d) * n + px] || nr < 0 || nc < 0 || nr >= h || nc >= w {
                            continue;
                        }
                        acc += weights.get(si, r as usize, c as usize) * features.get(ch, nr as usize, nc as usize);
                    }
                }
                out.push(acc + features.get(ch, r as usize, c as usize));
            }
        }
    }
    out
}

/// `(matched_extracted, unmatched_extracted, matched_reference, unmatched_reference)`
/// by comparing every pixel pair.
pub fn buffer_match(extracted: &Mask, reference: &Mask, threshold: f64) -> (u64, u64, u64, u64) {
    let a: Vec<(usize, usize)> = extracted.iter_set().collect();
    let b: Vec<(usize, usize)> = reference.iter_set().collect();
    let within = |p: (usize, usize), set: &[(usize, usize)]| {
        set.iter().any(|&q| {
            let dr = p.0 as f64 - q.0 as f64;
            let dc = p.1 as f64 - q.1 as f64;
            (dr * dr + dc * dc).sqrt() <= threshold
        })
    };
    let me = a.iter().filter(|&&p| within(p, &b)).count() as u64;
    let mr = b.iter().filter(|&&p| within(p, &a)).count() as u64;
    (me, a.len() as u64 - me, mr, b.len() as u64 - mr)
}

/// Quality as a ratio of counts, `TP / (TP + FP + FN)`.
pub fn quality_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    tp as f64 / (tp + fp + fn_) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{compute_affinity, NeighborhoodSpec};

    #[test]
    fn isolated_center_pixel() {
        let m = Mask::from_rows(&["000", "010", "000"]);
        let a = affinity(&m, &[3]);
        assert!((0..8).all(|s| a[s * 9 + 4] == 0.0));
        let field = compute_affinity(&m, &NeighborhoodSpec::single3());
        assert_eq!(field.data(), a.as_slice());
    }

    #[test]
    fn quality_counts() {
        assert_eq!(quality_from_counts(2, 1, 1), 0.5);
    }

    #[test]
    fn all_pairs_match() {
        let a = Mask::from_rows(&["1000", "0000", "0001"]);
        let b = Mask::from_rows(&["0100", "0000", "0000"]);
        assert_eq!(buffer_match(&a, &b, 1.0), (1, 1, 1, 0));
    }
}
