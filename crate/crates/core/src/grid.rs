//! Dense row-major grids shared by every other module.
//!
//! Pixels are addressed as `(row, col)` with the origin at the top-left corner.
//! Multi-plane types (affinity fields, feature maps, scale weights) store one
//! contiguous `height * width` plane per slot/channel/scale.

use std::fmt;

use crate::affinity::NeighborhoodSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Returns the in-bounds pixel at `(row + dr, col + dc)`, if any.
    #[inline]
    pub fn offset(&self, row: usize, col: usize, dr: isize, dc: isize) -> Option<(usize, usize)> {
        let r = row as isize + dr;
        let c = col as isize + dc;
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            None
        } else {
            Some((r as usize, c as usize))
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Anything with a spatial extent.
pub trait Grid {
    fn shape(&self) -> Shape;

    fn width(&self) -> usize {
        self.shape().width
    }

    fn height(&self) -> usize {
        self.shape().height
    }
}

/// Succeeds iff both grids have the same width and height.
pub fn validate_shapes<A, B>(a: &A, b: &B) -> Result<()>
where
    A: Grid + ?Sized,
    B: Grid + ?Sized,
{
    let (left, right) = (a.shape(), b.shape());
    if left == right {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { left, right })
    }
}

impl Grid for Shape {
    fn shape(&self) -> Shape {
        *self
    }
}

fn check_len(what: &str, shape: Shape, planes: usize, len: usize) -> Result<()> {
    let expected = shape.len() * planes;
    if len != expected {
        return Err(Error::InvalidValue(format!(
            "{what} {shape} with {planes} plane(s) needs {expected} values, got {len}"
        )));
    }
    Ok(())
}

fn check_finite(what: &str, data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidValue(format!(
            "{what} has non-finite value {} at index {i}",
            data[i]
        ))),
        None => Ok(()),
    }
}

fn check_unit(what: &str, data: &[f64]) -> Result<()> {
    check_finite(what, data)?;
    match data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::InvalidValue(format!(
            "{what} value {} at index {i} is outside [0, 1]",
            data[i]
        ))),
        None => Ok(()),
    }
}

macro_rules! impl_grid {
    ($($ty:ty),*) => {
        $(impl Grid for $ty {
            fn shape(&self) -> Shape {
                self.shape
            }
        })*
    };
}

/// Single-channel intensity image. Nominal range is [0, 255]; values outside
/// it are allowed so unclamped contrast edits stay representable.
#[derive(Debug, Clone, PartialEq)]
pub struct Grayscale {
    shape: Shape,
    data: Vec<f64>,
}

impl Grayscale {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(height, width);
        check_len("grayscale image", shape, 1, data.len())?;
        check_finite("grayscale image", &data)?;
        Ok(Self { shape, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.shape.index(row, col)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_in_byte_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=255.0).contains(v))
    }

    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }
}

/// Binary label image: 1 = vessel, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    shape: Shape,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        let shape = Shape::new(height, width);
        check_len("mask", shape, 1, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidValue(format!(
                "mask value {} at index {i} is not 0 or 1",
                data[i]
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            shape: Shape::new(height, width),
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        Self {
            shape: Shape::new(height, width),
            data,
        }
    }

    /// Parses rows of `'1'`/`'#'` (foreground) and anything else (background).
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        Self::from_fn(width, height, |r, c| {
            matches!(rows[r].as_bytes().get(c), Some(b'1') | Some(b'#'))
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[self.shape.index(row, col)] != 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.shape.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i / w, i % w))
    }

    pub fn invert(&self) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let Shape { height, width } = self.shape;
        Self::from_fn(height, width, |r, c| self.get(c, r))
    }

    pub fn and(&self, other: &Mask) -> Result<Self> {
        validate_shapes(self, other)?;
        Ok(self.zip_with(other, |a, b| a & b))
    }

    pub fn or(&self, other: &Mask) -> Result<Self> {
        validate_shapes(self, other)?;
        Ok(self.zip_with(other, |a, b| a | b))
    }

    /// Pixels set in `self` but not in `other`.
    pub fn minus(&self, other: &Mask) -> Result<Self> {
        validate_shapes(self, other)?;
        Ok(self.zip_with(other, |a, b| a & (1 - b)))
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(u8, u8) -> u8) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub(crate) fn from_raw(shape: Shape, data: Vec<u8>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        debug_assert!(data.iter().all(|&v| v <= 1));
        Self { shape, data }
    }

    pub(crate) fn into_raw(self) -> Vec<u8> {
        self.data
    }
}

/// Per-pixel foreground probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    shape: Shape,
    data: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(height, width);
        check_len("probability map", shape, 1, data.len())?;
        check_unit("probability map", &data)?;
        Ok(Self { shape, data })
    }

    pub fn from_mask(mask: &Mask) -> Self {
        Self {
            shape: mask.shape,
            data: mask.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.shape.index(row, col)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Foreground where `p >= threshold`.
    pub fn binarize(&self, threshold: f64) -> Mask {
        Mask::from_raw(self.shape, self.data.iter().map(|&p| (p >= threshold) as u8).collect())
    }
}

/// Unconstrained real-valued single-plane map (mean affinity, thickness, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct RealMap {
    shape: Shape,
    data: Vec<f64>,
}

impl RealMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(height, width);
        check_len("real map", shape, 1, data.len())?;
        check_finite("real map", &data)?;
        Ok(Self { shape, data })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.shape.index(row, col)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }
}

/// Per-pixel vector of directional affinities, one plane per layout slot.
///
/// Slot `s` corresponds to scale `spec.scales()[s / 8]` and direction
/// `Direction::ALL[s % 8]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityField {
    shape: Shape,
    spec: NeighborhoodSpec,
    data: Vec<f64>,
}

impl AffinityField {
    pub fn new(width: usize, height: usize, spec: NeighborhoodSpec, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(height, width);
        check_len("affinity field", shape, spec.slot_count(), data.len())?;
        check_unit("affinity field", &data)?;
        Ok(Self { shape, spec, data })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        spec: NeighborhoodSpec,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(spec.slot_count() * width * height);
        for s in 0..spec.slot_count() {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(s, r, c));
                }
            }
        }
        Self::new(width, height, spec, data)
    }

    pub fn spec(&self) -> &NeighborhoodSpec {
        &self.spec
    }

    pub fn slot_count(&self) -> usize {
        self.spec.slot_count()
    }

    #[inline]
    pub fn get(&self, slot: usize, row: usize, col: usize) -> f64 {
        self.data[slot * self.shape.len() + self.shape.index(row, col)]
    }

    pub fn plane(&self, slot: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[slot * n..(slot + 1) * n]
    }

    /// The affinity vector of one pixel, in layout order.
    pub fn pixel_vector(&self, row: usize, col: usize) -> Vec<f64> {
        let n = self.shape.len();
        let i = self.shape.index(row, col);
        (0..self.slot_count()).map(|s| self.data[s * n + i]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn same_layout(&self, other: &AffinityField) -> Result<()> {
        validate_shapes(self, other)?;
        if self.spec != other.spec {
            return Err(Error::LayoutMismatch {
                left: self.spec.scales().to_vec(),
                right: other.spec.scales().to_vec(),
            });
        }
        Ok(())
    }

    pub(crate) fn from_raw(shape: Shape, spec: NeighborhoodSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len() * spec.slot_count(), data.len());
        Self { shape, spec, data }
    }
}

/// Channel-major feature tensor `C x H x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    shape: Shape,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidValue("feature map needs at least one channel".into()));
        }
        let shape = Shape::new(height, width);
        check_len("feature map", shape, channels, data.len())?;
        check_finite("feature map", &data)?;
        Ok(Self { shape, channels, data })
    }

    pub fn from_fn(
        channels: usize,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * width * height);
        for ch in 0..channels {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(ch, r, c));
                }
            }
        }
        Self::new(channels, width, height, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[channel * self.shape.len() + self.shape.index(row, col)]
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn from_raw(channels: usize, shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len() * channels, data.len());
        Self { shape, channels, data }
    }
}

/// Adaptive per-pixel weights, one plane per neighborhood scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleWeightMap {
    shape: Shape,
    scales: Vec<u32>,
    data: Vec<f64>,
}

impl ScaleWeightMap {
    pub fn new(scales: Vec<u32>, width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidScaleList(scales));
        }
        let shape = Shape::new(height, width);
        check_len("scale weight map", shape, scales.len(), data.len())?;
        check_finite("scale weight map", &data)?;
        Ok(Self { shape, scales, data })
    }

    pub fn uniform(scales: Vec<u32>, width: usize, height: usize, value: f64) -> Result<Self> {
        let n = scales.len() * width * height;
        Self::new(scales, width, height, vec![value; n])
    }

    pub fn scales(&self) -> &[u32] {
        &self.scales
    }

    #[inline]
    pub fn get(&self, scale_index: usize, row: usize, col: usize) -> f64 {
        self.data[scale_index * self.shape.len() + self.shape.index(row, col)]
    }

    pub fn plane(&self, scale_index: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[scale_index * n..(scale_index + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl_grid!(
    Grayscale,
    Mask,
    ProbMap,
    RealMap,
    AffinityField,
    FeatureMap,
    ScaleWeightMap
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_shapes_matches_and_mismatches() {
        assert!(validate_shapes(&Mask::empty(3, 3), &Mask::empty(3, 3)).is_ok());
        assert!(validate_shapes(&Shape::new(512, 512), &Shape::new(512, 512)).is_ok());
        let err = validate_shapes(&Mask::empty(3, 3), &Mask::empty(4, 3)).unwrap_err();
        match err {
            Error::ShapeMismatch { left, right } => {
                assert_eq!(left, Shape::new(3, 3));
                assert_eq!(right, Shape::new(3, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constructors_reject_non_finite() {
        assert!(Grayscale::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(RealMap::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(FeatureMap::new(1, 1, 1, vec![f64::NEG_INFINITY]).is_err());
        assert!(ProbMap::new(1, 1, vec![1.5]).is_err());
        assert!(Mask::new(1, 1, vec![2]).is_err());
        assert!(FeatureMap::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn length_is_checked() {
        assert!(Grayscale::new(2, 2, vec![0.0; 3]).is_err());
        let spec = NeighborhoodSpec::new(vec![3]).unwrap();
        assert!(AffinityField::new(2, 2, spec.clone(), vec![0.0; 31]).is_err());
        assert!(AffinityField::new(2, 2, spec, vec![0.0; 32]).is_ok());
    }

    #[test]
    fn shape_offset_respects_bounds() {
        let s = Shape::new(3, 4);
        assert_eq!(s.offset(0, 0, -1, 0), None);
        assert_eq!(s.offset(2, 3, 0, 1), None);
        assert_eq!(s.offset(1, 1, 1, 2), Some((2, 3)));
    }
}
