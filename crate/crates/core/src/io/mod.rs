//! Filesystem boundary: images, masks, the AFF tensor container, evaluation
//! reports, and prediction/ground-truth directory pairing.

pub mod aff;
pub mod image;
pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use aff::{
    decode_aff, encode_aff, read_aff, read_affinity, read_features, read_weights, write_aff, AffKind, AffPayload,
};
pub use image::{
    decode_image, read_image, read_image_channels, read_mask, write_image, write_image_channels, write_mask, ColorMode,
    DEFAULT_MASK_THRESHOLD,
};
pub use report::{
    aggregate, render_report, write_report, Aggregate, AggregateMode, EvalRecord, ReportFormat, StratifiedSummary,
    StratumSummary,
};

pub const IMAGE_EXTENSIONS: [&str; 2] = ["pgm", "png"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePair {
    pub id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

/// Image files in `dir` keyed by stem. Two files sharing a stem are an error.
pub fn list_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if !is_image || !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            continue;
        };
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(Error::UnpairedFiles(format!(
                "{} and {} share the stem `{stem}`",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Pairs predictions with ground truth by file stem, sorted by id. Any stem
/// present on only one side is an error.
pub fn pair_by_stem(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<ImagePair>> {
    let pred = list_images(pred_dir)?;
    let mut gt = list_images(gt_dir)?;
    let only_pred: Vec<&str> = pred
        .keys()
        .filter(|k| !gt.contains_key(*k))
        .map(String::as_str)
        .collect();
    let only_gt: Vec<&str> = gt
        .keys()
        .filter(|k| !pred.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !only_pred.is_empty() || !only_gt.is_empty() {
        return Err(Error::UnpairedFiles(format!(
            "only in {}: [{}]; only in {}: [{}]",
            pred_dir.display(),
            only_pred.join(", "),
            gt_dir.display(),
            only_gt.join(", ")
        )));
    }
    if pred.is_empty() {
        return Err(Error::UnpairedFiles(format!(
            "no PGM/PNG images in {}",
            pred_dir.display()
        )));
    }
    Ok(pred
        .into_iter()
        .map(|(id, p)| {
            let g = gt.remove(&id).expect("stems checked");
            ImagePair { id, pred: p, gt: g }
        })
        .collect())
}
