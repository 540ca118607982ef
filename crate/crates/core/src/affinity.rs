//! Ground-truth multi-scale affinity fields.
//!
//! A neighborhood of window size `k` contributes the eight compass neighbors at
//! Chebyshev radius `(k - 1) / 2`. A slot holds 1 when the neighbor carries the
//! same label as the center pixel and 0 otherwise; neighbors that fall outside
//! the image count as a different label.

use crate::error::{Error, Result};
use crate::grid::{AffinityField, Grid, Mask, ProbMap, Shape};

/// Compass direction of a neighbor, in canonical layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
    Top,
    Bottom,
    LeftTop,
    LeftBottom,
    RightTop,
    RightBottom,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::Left,
        Direction::Right,
        Direction::Top,
        Direction::Bottom,
        Direction::LeftTop,
        Direction::LeftBottom,
        Direction::RightTop,
        Direction::RightBottom,
    ];

    /// Unit `(d_row, d_col)` step.
    pub const fn unit(self) -> (isize, isize) {
        match self {
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
            Direction::Top => (-1, 0),
            Direction::Bottom => (1, 0),
            Direction::LeftTop => (-1, -1),
            Direction::LeftBottom => (1, -1),
            Direction::RightTop => (-1, 1),
            Direction::RightBottom => (1, 1),
        }
    }

    pub const fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Top => Direction::Bottom,
            Direction::Bottom => Direction::Top,
            Direction::LeftTop => Direction::RightBottom,
            Direction::LeftBottom => Direction::RightTop,
            Direction::RightTop => Direction::LeftBottom,
            Direction::RightBottom => Direction::LeftTop,
        }
    }

    pub fn index(self) -> usize {
        Direction::ALL.iter().position(|&d| d == self).unwrap()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Direction::Left => "L",
            Direction::Right => "R",
            Direction::Top => "T",
            Direction::Bottom => "B",
            Direction::LeftTop => "LT",
            Direction::LeftBottom => "LB",
            Direction::RightTop => "RT",
            Direction::RightBottom => "RB",
        }
    }
}

/// Ordered list of odd window sizes, e.g. `[3, 9, 15]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeighborhoodSpec {
    scales: Vec<u32>,
}

impl NeighborhoodSpec {
    pub fn new(scales: Vec<u32>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidScaleList(scales));
        }
        for &k in &scales {
            if k < 3 || k % 2 == 0 || k > u16::MAX as u32 {
                return Err(Error::InvalidScale(k));
            }
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScaleList(scales));
        }
        Ok(Self { scales })
    }

    pub fn single3() -> Self {
        Self { scales: vec![3] }
    }

    pub fn scales(&self) -> &[u32] {
        &self.scales
    }

    pub fn slot_count(&self) -> usize {
        8 * self.scales.len()
    }

    pub fn radius(&self, scale_index: usize) -> usize {
        ((self.scales[scale_index] - 1) / 2) as usize
    }

    /// `(scale, direction)` for a layout slot.
    pub fn slot(&self, slot: usize) -> (u32, Direction) {
        (self.scales[slot / 8], Direction::ALL[slot % 8])
    }

    /// Slot index of `direction` at the given scale position.
    pub fn slot_index(&self, scale_index: usize, direction: Direction) -> usize {
        scale_index * 8 + direction.index()
    }
}

/// `(d_row, d_col)` for every layout slot, scales ascending then canonical
/// direction order.
pub fn neighbor_offsets(spec: &NeighborhoodSpec) -> Vec<(isize, isize)> {
    (0..spec.scales().len())
        .flat_map(|si| {
            let r = spec.radius(si) as isize;
            Direction::ALL.iter().map(move |d| {
                let (dr, dc) = d.unit();
                (dr * r, dc * r)
            })
        })
        .collect()
}

/// Ground-truth affinity field of a label mask.
pub fn compute_affinity(mask: &Mask, spec: &NeighborhoodSpec) -> AffinityField {
    let shape = mask.shape();
    let n = shape.len();
    let offsets = neighbor_offsets(spec);
    let mut data = vec![0.0; n * offsets.len()];
    for (slot, &(dr, dc)) in offsets.iter().enumerate() {
        let plane = &mut data[slot * n..(slot + 1) * n];
        for r in 0..shape.height {
            for c in 0..shape.width {
                if let Some((nr, nc)) = shape.offset(r, c, dr, dc) {
                    if mask.get(r, c) == mask.get(nr, nc) {
                        plane[shape.index(r, c)] = 1.0;
                    }
                }
            }
        }
    }
    AffinityField::from_raw(shape, spec.clone(), data)
}

/// Soft ground truth is binarized at 0.5 before labels are compared.
pub fn compute_affinity_soft(truth: &ProbMap, spec: &NeighborhoodSpec) -> AffinityField {
    compute_affinity(&truth.binarize(0.5), spec)
}

/// True iff `field` is exactly the ground-truth field of `mask` under `spec`.
pub fn mask_from_affinity_consistency(field: &AffinityField, mask: &Mask, spec: &NeighborhoodSpec) -> Result<bool> {
    crate::grid::validate_shapes(field, mask)?;
    if field.spec() != spec {
        return Ok(false);
    }
    Ok(compute_affinity(mask, spec).data() == field.data())
}

/// Whether a pixel's neighbor for `slot` lies inside the image.
pub fn neighbor_in_bounds(shape: Shape, spec: &NeighborhoodSpec, slot: usize, row: usize, col: usize) -> bool {
    let r = spec.radius(slot / 8) as isize;
    let (dr, dc) = Direction::ALL[slot % 8].unit();
    shape.offset(row, col, dr * r, dc * r).is_some()
}
