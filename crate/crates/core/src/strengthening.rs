//! Affinity-guided feature strengthening.
//!
//! A predicted affinity field is turned into a binary selection per slot by
//! comparing each slot to the mean over all slots of that pixel. Selected
//! neighbor features are then summed (optionally weighted per scale) and added
//! back onto the pixel's own feature as a residual.

use crate::affinity::{neighbor_offsets, NeighborhoodSpec};
use crate::error::{Error, Result};
use crate::grid::{validate_shapes, AffinityField, FeatureMap, Grid, RealMap, ScaleWeightMap, Shape};

/// Binary gate with the same layout as the affinity field it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionField {
    shape: Shape,
    spec: NeighborhoodSpec,
    data: Vec<u8>,
}

impl SelectionField {
    /// Builds a selection field from explicit 0/1 values (slot-major planes).
    pub fn new(width: usize, height: usize, spec: NeighborhoodSpec, data: Vec<u8>) -> Result<Self> {
        let shape = Shape::new(height, width);
        if data.len() != shape.len() * spec.slot_count() {
            return Err(Error::InvalidValue(format!(
                "selection field {shape} needs {} values, got {}",
                shape.len() * spec.slot_count(),
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidValue("selection values must be 0 or 1".into()));
        }
        Ok(Self { shape, spec, data })
    }

    pub fn spec(&self) -> &NeighborhoodSpec {
        &self.spec
    }

    #[inline]
    pub fn get(&self, slot: usize, row: usize, col: usize) -> bool {
        self.data[slot * self.shape.len() + self.shape.index(row, col)] != 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

impl Grid for SelectionField {
    fn shape(&self) -> Shape {
        self.shape
    }
}

/// Per-pixel mean over all layout slots.
pub fn mean_affinity(pred: &AffinityField) -> RealMap {
    let shape = pred.shape();
    let n = shape.len();
    let slots = pred.slot_count();
    let data = pred.data();
    let means = (0..n)
        .map(|px| (0..slots).map(|s| data[s * n + px]).sum::<f64>() / slots as f64)
        .collect();
    RealMap::from_raw(shape, means)
}

/// Selects slots whose affinity is at least the pixel's mean affinity.
pub fn select(pred: &AffinityField) -> SelectionField {
    let shape = pred.shape();
    let n = shape.len();
    let slots = pred.slot_count();
    let data = pred.data();
    let mut out = vec![0u8; data.len()];
    let mut v = vec![0.0; slots];
    for px in 0..n {
        for (s, y) in v.iter_mut().enumerate() {
            *y = data[s * n + px];
        }
        for (l, keep) in select_vector(&v).into_iter().enumerate() {
            out[l * n + px] = keep as u8;
        }
    }
    SelectionField {
        shape,
        spec: pred.spec().clone(),
        data: out,
    }
}

/// The selection test for one affinity vector.
///
/// `y_l >= mean(y)` is evaluated as `sum_j (y_l - y_j) >= 0`, the same
/// inequality scaled by the slot count, which keeps exact ties (e.g. a
/// uniform vector) exact in floating point.
pub fn select_vector(y: &[f64]) -> Vec<bool> {
    y.iter()
        .map(|&yl| y.iter().map(|&yj| yl - yj).sum::<f64>() >= 0.0)
        .collect()
}

/// Multi-scale strengthening with per-scale adaptive weights.
pub fn smafs(features: &FeatureMap, pred: &AffinityField, weights: &ScaleWeightMap) -> Result<FeatureMap> {
    validate_shapes(features, pred)?;
    validate_shapes(features, weights)?;
    if weights.scales() != pred.spec().scales() {
        return Err(Error::ScaleMismatch {
            weights: weights.scales().to_vec(),
            field: pred.spec().scales().to_vec(),
        });
    }
    Ok(smafs_with_selection(features, &select(pred), weights))
}

/// Strengthening with an explicit selection field, bypassing the mean test.
pub fn smafs_with_selection(features: &FeatureMap, selection: &SelectionField, weights: &ScaleWeightMap) -> FeatureMap {
    aggregate(features, selection, |scale_index, r, c| weights.get(scale_index, r, c))
}

/// Single-scale (3x3) strengthening without weights.
pub fn uafs(features: &FeatureMap, pred: &AffinityField) -> Result<FeatureMap> {
    validate_shapes(features, pred)?;
    if pred.spec().scales() != [3] {
        return Err(Error::LayoutMismatch {
            left: pred.spec().scales().to_vec(),
            right: vec![3],
        });
    }
    let selection = select(pred);
    let shape = features.shape();
    let n = shape.len();
    let offsets = neighbor_offsets(selection.spec());
    let mut out = Vec::with_capacity(features.data().len());
    for ch in 0..features.channels() {
        let plane = features.plane(ch);
        for r in 0..shape.height {
            for c in 0..shape.width {
                let mut acc = 0.0;
                for (slot, &(dr, dc)) in offsets.iter().enumerate() {
                    if !selection.get(slot, r, c) {
                        continue;
                    }
                    if let Some((nr, nc)) = shape.offset(r, c, dr, dc) {
                        acc += plane[shape.index(nr, nc)];
                    }
                }
                out.push(acc + plane[shape.index(r, c)]);
            }
        }
    }
    debug_assert_eq!(out.len(), features.channels() * n);
    Ok(FeatureMap::from_raw(features.channels(), shape, out))
}

/// The residual-free aggregation term, `smafs(f) - f`.
pub fn smafs_aggregate(features: &FeatureMap, pred: &AffinityField, weights: &ScaleWeightMap) -> Result<FeatureMap> {
    let strengthened = smafs(features, pred, weights)?;
    let data = strengthened
        .data()
        .iter()
        .zip(features.data())
        .map(|(s, f)| s - f)
        .collect();
    Ok(FeatureMap::from_raw(features.channels(), features.shape(), data))
}

fn aggregate(
    features: &FeatureMap,
    selection: &SelectionField,
    weight: impl Fn(usize, usize, usize) -> f64,
) -> FeatureMap {
    let shape = features.shape();
    let offsets = neighbor_offsets(selection.spec());
    let mut out = Vec::with_capacity(features.data().len());
    for ch in 0..features.channels() {
        let plane = features.plane(ch);
        for r in 0..shape.height {
            for c in 0..shape.width {
                let mut acc = 0.0;
                for (slot, &(dr, dc)) in offsets.iter().enumerate() {
                    if !selection.get(slot, r, c) {
                        continue;
                    }
                    // zero padding outside the image
                    if let Some((nr, nc)) = shape.offset(r, c, dr, dc) {
                        acc += weight(slot / 8, r, c) * plane[shape.index(nr, nc)];
                    }
                }
                out.push(acc + plane[shape.index(r, c)]);
            }
        }
    }
    FeatureMap::from_raw(features.channels(), shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: &[u32]) -> NeighborhoodSpec {
        NeighborhoodSpec::new(s.to_vec()).unwrap()
    }

    fn vector_field(v: &[f64]) -> AffinityField {
        let s = match v.len() {
            8 => spec(&[3]),
            24 => spec(&[3, 9, 15]),
            n => panic!("unsupported length {n}"),
        };
        AffinityField::new(1, 1, s, v.to_vec()).unwrap()
    }

    #[test]
    fn mean_affinity_examples() {
        let ones = AffinityField::from_fn(3, 2, spec(&[3, 5]), |_, _, _| 1.0).unwrap();
        assert!(mean_affinity(&ones).data().iter().all(|&m| m == 1.0));
        let alt = vector_field(&[1., 0., 1., 0., 1., 0., 1., 0.]);
        assert_eq!(mean_affinity(&alt).data(), &[0.5]);
        let mut v = vec![0.0; 24];
        for i in [0, 3, 7, 11, 19, 23] {
            v[i] = 1.0;
        }
        assert_eq!(mean_affinity(&vector_field(&v)).data(), &[0.25]);
    }

    #[test]
    fn select_examples() {
        let alt = vector_field(&[1., 0., 1., 0., 1., 0., 1., 0.]);
        assert_eq!(select(&alt).data(), &[1, 0, 1, 0, 1, 0, 1, 0]);
        for c in [0.1, 0.3, 0.7, 1.0 / 3.0] {
            assert_eq!(select(&vector_field(&[c; 8])).data(), &[1; 8], "uniform {c}");
        }
        let peaked = vector_field(&[0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]);
        assert_eq!(select(&peaked).data(), &[1, 0, 0, 0, 0, 0, 0, 0]);
    }

    fn constant_features(value: f64, w: usize, h: usize) -> FeatureMap {
        FeatureMap::from_fn(1, w, h, |_, _, _| value).unwrap()
    }

    #[test]
    fn smafs_constant_interior_example() {
        let f = constant_features(2.0, 5, 5);
        let pred = AffinityField::from_fn(5, 5, spec(&[3]), |_, _, _| 0.8).unwrap();
        let w = ScaleWeightMap::uniform(vec![3], 5, 5, 0.5).unwrap();
        let out = smafs(&f, &pred, &w).unwrap();
        assert_eq!(out.get(0, 2, 2), 10.0);
        // corner: 3 in-bounds neighbors
        assert_eq!(out.get(0, 0, 0), 0.5 * 3.0 * 2.0 + 2.0);
    }

    #[test]
    fn smafs_identity_cases() {
        let f = FeatureMap::from_fn(2, 4, 3, |ch, r, c| (ch * 7 + r * 3 + c) as f64 - 4.5).unwrap();
        let s = spec(&[3, 5]);
        let pred = AffinityField::from_fn(4, 3, s.clone(), |sl, r, c| ((sl + r + c) % 5) as f64 / 4.0).unwrap();
        let zero_w = ScaleWeightMap::uniform(vec![3, 5], 4, 3, 0.0).unwrap();
        assert_eq!(smafs(&f, &pred, &zero_w).unwrap(), f);
        let none = SelectionField::new(4, 3, s, vec![0; 16 * 12]).unwrap();
        let w = ScaleWeightMap::uniform(vec![3, 5], 4, 3, 1.7).unwrap();
        assert_eq!(smafs_with_selection(&f, &none, &w), f);
    }

    #[test]
    fn smafs_rejects_mismatches() {
        let f = constant_features(1.0, 4, 4);
        let pred = AffinityField::from_fn(4, 4, spec(&[3, 5]), |_, _, _| 0.5).unwrap();
        let w = ScaleWeightMap::uniform(vec![3], 4, 4, 1.0).unwrap();
        assert!(matches!(smafs(&f, &pred, &w), Err(Error::ScaleMismatch { .. })));
        let w = ScaleWeightMap::uniform(vec![3, 5], 5, 4, 1.0).unwrap();
        assert!(matches!(smafs(&f, &pred, &w), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn uafs_examples() {
        let f = constant_features(1.5, 4, 4);
        let all = AffinityField::from_fn(4, 4, spec(&[3]), |_, _, _| 0.6).unwrap();
        assert_eq!(uafs(&f, &all).unwrap().get(0, 1, 1), 9.0 * 1.5);
        let multi = AffinityField::from_fn(4, 4, spec(&[3, 5]), |_, _, _| 0.6).unwrap();
        assert!(matches!(uafs(&f, &multi), Err(Error::LayoutMismatch { .. })));
        let five = AffinityField::from_fn(4, 4, spec(&[5]), |_, _, _| 0.6).unwrap();
        assert!(uafs(&f, &five).is_err());
    }

    #[test]
    fn uafs_matches_unit_weight_smafs() {
        let f = FeatureMap::from_fn(3, 6, 5, |ch, r, c| ((ch + 1) * (r + 2 * c)) as f64 * 0.37 - 3.0).unwrap();
        let pred = AffinityField::from_fn(6, 5, spec(&[3]), |s, r, c| {
            ((s * 13 + r * 7 + c * 3) % 11) as f64 / 10.0
        })
        .unwrap();
        let w = ScaleWeightMap::uniform(vec![3], 6, 5, 1.0).unwrap();
        assert_eq!(uafs(&f, &pred).unwrap(), smafs(&f, &pred, &w).unwrap());
    }
}
