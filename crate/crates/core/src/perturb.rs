//! Global contrast edits around the image mean, for robustness sweeps.

use crate::error::{Error, Result};
use crate::grid::{Grayscale, Grid};

pub const XCAD_RATIOS: [f64; 6] = [1.7, 1.6, 1.5, 0.9, 0.85, 0.8];
pub const DRIVE_RATIOS: [f64; 6] = [1.3, 1.2, 1.1, 0.4, 0.3, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSweep {
    ratios: Vec<f64>,
    clamp: bool,
}

impl ContrastSweep {
    pub fn new(ratios: Vec<f64>, clamp: bool) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidParameter(
                "contrast sweep needs at least one ratio".into(),
            ));
        }
        for &r in &ratios {
            validate_ratio(r)?;
        }
        Ok(Self { ratios, clamp })
    }

    pub fn xcad(clamp: bool) -> Self {
        Self {
            ratios: XCAD_RATIOS.to_vec(),
            clamp,
        }
    }

    pub fn drive(clamp: bool) -> Self {
        Self {
            ratios: DRIVE_RATIOS.to_vec(),
            clamp,
        }
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn clamp(&self) -> bool {
        self.clamp
    }
}

fn validate_ratio(ratio: f64) -> Result<()> {
    if ratio.is_finite() && ratio > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRatio(ratio))
    }
}

/// `mean + (I(x) - mean) * ratio`, optionally clipped to [0, 255].
/// Ratio 1 returns the input unchanged (bit for bit).
pub fn adjust_contrast(img: &Grayscale, ratio: f64, clamp: bool) -> Result<Grayscale> {
    validate_ratio(ratio)?;
    if ratio == 1.0 {
        let data = img
            .data()
            .iter()
            .map(|&v| if clamp { v.clamp(0.0, 255.0) } else { v })
            .collect();
        return Ok(Grayscale::from_raw(img.shape(), data));
    }
    let mean = img.mean();
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let out = mean + (v - mean) * ratio;
            if clamp {
                out.clamp(0.0, 255.0)
            } else {
                out
            }
        })
        .collect();
    Ok(Grayscale::from_raw(img.shape(), data))
}

/// Applies the edit to every channel independently, each around its own mean.
pub fn adjust_contrast_channels(channels: &[Grayscale], ratio: f64, clamp: bool) -> Result<Vec<Grayscale>> {
    channels.iter().map(|ch| adjust_contrast(ch, ratio, clamp)).collect()
}

/// One edited image per ratio, in sweep order.
pub fn sweep(img: &Grayscale, sweep: &ContrastSweep) -> Vec<(f64, Grayscale)> {
    sweep
        .ratios
        .iter()
        .map(|&r| {
            let out = adjust_contrast(img, r, sweep.clamp).expect("ratios validated on construction");
            (r, out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Grayscale {
        Grayscale::from_fn(8, 6, |r, c| (r * 31 + c * 7) as f64).unwrap()
    }

    #[test]
    fn unit_ratio_is_identity() {
        let img = ramp();
        assert_eq!(adjust_contrast(&img, 1.0, false).unwrap(), img);
    }

    #[test]
    fn arithmetic_example() {
        // mean 100; pixel 150 at ratio 1.5 becomes 175
        let img = Grayscale::new(2, 1, vec![50.0, 150.0]).unwrap();
        let out = adjust_contrast(&img, 1.5, false).unwrap();
        assert_eq!(out.data(), &[25.0, 175.0]);
    }

    #[test]
    fn mean_preserved_without_clamp() {
        let img = ramp();
        for r in XCAD_RATIOS.iter().chain(&DRIVE_RATIOS) {
            let out = adjust_contrast(&img, *r, false).unwrap();
            assert!((out.mean() - img.mean()).abs() < 1e-9);
        }
    }

    #[test]
    fn clamp_limits_range() {
        let img = Grayscale::new(3, 1, vec![0.0, 128.0, 255.0]).unwrap();
        let out = adjust_contrast(&img, 1.7, true).unwrap();
        assert!(out.is_in_byte_range());
        assert!(!adjust_contrast(&img, 1.7, false).unwrap().is_in_byte_range());
    }

    #[test]
    fn invalid_ratios() {
        let img = ramp();
        assert!(matches!(adjust_contrast(&img, 0.0, false), Err(Error::InvalidRatio(_))));
        assert!(adjust_contrast(&img, -1.0, false).is_err());
        assert!(ContrastSweep::new(vec![1.0, 0.0], true).is_err());
        assert!(ContrastSweep::new(vec![], true).is_err());
    }

    #[test]
    fn sweeps() {
        let img = ramp();
        let one = sweep(&img, &ContrastSweep::new(vec![1.0], false).unwrap());
        assert_eq!(one, vec![(1.0, img.clone())]);
        let out = sweep(&img, &ContrastSweep::xcad(true));
        assert_eq!(out.iter().map(|(r, _)| *r).collect::<Vec<_>>(), XCAD_RATIOS.to_vec());
        assert_eq!(sweep(&img, &ContrastSweep::drive(true)).len(), 6);
    }
}
