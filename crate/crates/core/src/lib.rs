//! Vessel segmentation toolkit built around pixel affinity fields.
//!
//! - [`affinity`]: ground-truth affinity fields over multi-scale neighbourhoods
//! - [`losses`]: BCE and affinity-cosine losses with analytic gradients
//! - [`strengthening`]: affinity-gated feature aggregation
//! - [`metrics`]: pixel and centerline metrics, thin/thick stratification
//! - [`perturb`]: global contrast edits
//! - [`synthgen`]: synthetic vessel trees and degraded predictions
//! - [`io`]: image, tensor container, and report formats
//!
//! All randomness flows from explicit seeds through [`rng`].

pub mod affinity;
pub mod error;
pub mod grid;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod oracle;
pub mod perturb;
pub mod rng;
pub mod selfcheck;
pub mod strengthening;
pub mod synthgen;

pub use affinity::{compute_affinity, Direction, NeighborhoodSpec};
pub use error::{Error, Result};
pub use grid::{AffinityField, FeatureMap, Grayscale, Grid, Mask, ProbMap, RealMap, ScaleWeightMap, Shape};
