use serde::Serialize;

use crate::error::Result;
use crate::grid::{validate_shapes, Mask};
use crate::metrics::{ratio, Flag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_masks(pred: &Mask, gt: &Mask) -> Result<Self> {
        validate_shapes(pred, gt)?;
        let mut c = Confusion::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            match (p != 0, g != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn metrics(&self) -> PixelMetrics {
        let mut flags = Vec::new();
        let precision = ratio(self.tp, self.tp + self.fp, Flag::PrecisionUndefined, &mut flags);
        let recall = ratio(self.tp, self.tp + self.fn_, Flag::RecallUndefined, &mut flags);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            flags.push(Flag::F1Undefined);
            0.0
        };
        PixelMetrics {
            precision,
            recall,
            f1,
            flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PixelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: Vec<Flag>,
}

pub fn pixel_metrics(pred: &Mask, gt: &Mask) -> Result<PixelMetrics> {
    Ok(Confusion::from_masks(pred, gt)?.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_masks() {
        let m = Mask::from_rows(&["0110", "0010"]);
        let p = pixel_metrics(&m, &m).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        assert!(p.flags.is_empty());
    }

    #[test]
    fn empty_prediction_is_flagged() {
        let gt = Mask::from_rows(&["0110"]);
        let p = pixel_metrics(&Mask::empty(4, 1), &gt).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        assert_eq!(p.flags, vec![Flag::PrecisionUndefined, Flag::F1Undefined]);
    }

    #[test]
    fn three_one_one() {
        let c = Confusion {
            tp: 3,
            fp: 1,
            fn_: 1,
            tn: 10,
        };
        let p = c.metrics();
        assert_eq!((p.precision, p.recall, p.f1), (0.75, 0.75, 0.75));
        let pred = Mask::from_rows(&["11110"]);
        let gt = Mask::from_rows(&["01111"]);
        let c = Confusion::from_masks(&pred, &gt).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (3, 1, 1, 0));
        assert_eq!(c.total(), 5);
    }
}
